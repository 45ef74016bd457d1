//! A small expression language for kernel densities, drifts and variances.
//!
//! Grammar: real literals (decimal, optional exponent), declared variables,
//! binary `+ - * / ^` (with `^` right-associative and binding tighter than
//! unary minus), unary minus, the functions `exp log sqrt sin cos tanh abs`,
//! and the constants `pi` and `e`. There are no user-defined functions and
//! no conditionals, so every expression is continuous on its domain.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Tanh,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tanh" => Func::Tanh,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    /// Variable with its slot in the declared-variable list.
    Var { name: String, slot: usize },
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression bound to an ordered list of declared variables.
///
/// Evaluation takes a value slice ordered like the declared list, so hot
/// loops avoid name lookups.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    vars: Vec<String>,
    root: Node,
}

/// Parse `text` against the declared variable names (order fixes eval slots).
pub fn parse_expression(text: &str, allowed_vars: &[&str]) -> Result<Expr> {
    let mut parser = Parser {
        src: text.as_bytes(),
        pos: 0,
        vars: allowed_vars,
    };
    let root = parser.parse_expr()?;
    parser.skip_ws();
    if parser.pos != parser.src.len() {
        return Err(Error::Parse {
            offset: parser.pos,
            message: format!("unexpected trailing input `{}`", &text[parser.pos..]),
        });
    }
    Ok(Expr {
        vars: allowed_vars.iter().map(|s| s.to_string()).collect(),
        root,
    })
}

/// Evaluate with `values[i]` bound to the i-th declared variable.
pub fn eval_ast(expr: &Expr, values: &[f64]) -> Result<f64> {
    debug_assert_eq!(values.len(), expr.vars.len());
    eval_node(&expr.root, values)
}

/// The exact set of variable names occurring in the expression.
pub fn free_variables(expr: &Expr) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_vars(&expr.root, &mut out);
    out
}

impl Expr {
    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn eval(&self, values: &[f64]) -> Result<f64> {
        eval_ast(self, values)
    }

    pub fn free_variables(&self) -> BTreeSet<String> {
        free_variables(self)
    }

    /// True if none of `names` occurs free in the expression.
    pub fn independent_of(&self, names: &[&str]) -> bool {
        let free = self.free_variables();
        names.iter().all(|n| !free.contains(*n))
    }
}

fn collect_vars(node: &Node, out: &mut BTreeSet<String>) {
    match node {
        Node::Num(_) => {}
        Node::Var { name, .. } => {
            out.insert(name.clone());
        }
        Node::Neg(inner) | Node::Call(_, inner) => collect_vars(inner, out),
        Node::Bin(_, lhs, rhs) => {
            collect_vars(lhs, out);
            collect_vars(rhs, out);
        }
    }
}

fn eval_node(node: &Node, values: &[f64]) -> Result<f64> {
    match node {
        Node::Num(v) => Ok(*v),
        Node::Var { slot, .. } => Ok(values[*slot]),
        Node::Neg(inner) => Ok(-eval_node(inner, values)?),
        Node::Bin(op, lhs, rhs) => {
            let a = eval_node(lhs, values)?;
            let b = eval_node(rhs, values)?;
            match op {
                BinOp::Add => Ok(a + b),
                BinOp::Sub => Ok(a - b),
                BinOp::Mul => Ok(a * b),
                BinOp::Div => {
                    if b == 0.0 {
                        Err(Error::Eval {
                            node: node_to_string(node),
                            message: "division by zero".into(),
                        })
                    } else {
                        Ok(a / b)
                    }
                }
                BinOp::Pow => {
                    let v = a.powf(b);
                    if v.is_finite() || a.is_infinite() || b.is_infinite() {
                        Ok(v)
                    } else {
                        Err(Error::Eval {
                            node: node_to_string(node),
                            message: format!("{a}^{b} is undefined"),
                        })
                    }
                }
            }
        }
        Node::Call(func, inner) => {
            let x = eval_node(inner, values)?;
            match func {
                Func::Exp => Ok(x.exp()),
                Func::Log => {
                    if x <= 0.0 {
                        Err(Error::Eval {
                            node: node_to_string(node),
                            message: format!("log of non-positive value {x}"),
                        })
                    } else {
                        Ok(x.ln())
                    }
                }
                Func::Sqrt => {
                    if x < 0.0 {
                        Err(Error::Eval {
                            node: node_to_string(node),
                            message: format!("sqrt of negative value {x}"),
                        })
                    } else {
                        Ok(x.sqrt())
                    }
                }
                Func::Sin => Ok(x.sin()),
                Func::Cos => Ok(x.cos()),
                Func::Tanh => Ok(x.tanh()),
                Func::Abs => Ok(x.abs()),
            }
        }
    }
}

fn node_to_string(node: &Node) -> String {
    let mut s = String::new();
    write_node(&mut s, node).expect("writing to String cannot fail");
    s
}

fn write_node(out: &mut String, node: &Node) -> fmt::Result {
    use fmt::Write;
    match node {
        Node::Num(v) => write!(out, "{v}"),
        Node::Var { name, .. } => write!(out, "{name}"),
        Node::Neg(inner) => {
            out.push_str("(-");
            write_node(out, inner)?;
            out.push(')');
            Ok(())
        }
        Node::Bin(op, lhs, rhs) => {
            let sym = match op {
                BinOp::Add => "+",
                BinOp::Sub => "-",
                BinOp::Mul => "*",
                BinOp::Div => "/",
                BinOp::Pow => "^",
            };
            out.push('(');
            write_node(out, lhs)?;
            out.push_str(sym);
            write_node(out, rhs)?;
            out.push(')');
            Ok(())
        }
        Node::Call(func, inner) => {
            out.push_str(func.name());
            out.push('(');
            write_node(out, inner)?;
            out.push(')');
            Ok(())
        }
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesized form; re-parsing it yields an equivalent AST.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&node_to_string(&self.root))
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a [&'a str],
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn parse_expr(&mut self) -> Result<Node> {
        let mut lhs = self.parse_term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Node::Bin(BinOp::Add, Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Node::Bin(BinOp::Sub, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_term(&mut self) -> Result<Node> {
        let mut lhs = self.parse_unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.parse_unary()?;
                    lhs = Node::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.parse_unary()?;
                    lhs = Node::Bin(BinOp::Div, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_unary(&mut self) -> Result<Node> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.parse_unary()?;
            return Ok(Node::Neg(Box::new(inner)));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Node> {
        let base = self.parse_atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            // Right-associative; the exponent may itself carry a unary minus.
            let exp = self.parse_unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<Node> {
        let c = self.peek().ok_or(Error::Parse {
            offset: self.pos,
            message: "unexpected end of input".into(),
        })?;
        if c == b'(' {
            self.pos += 1;
            let inner = self.parse_expr()?;
            if self.peek() != Some(b')') {
                return Err(Error::Parse {
                    offset: self.pos,
                    message: "expected `)`".into(),
                });
            }
            self.pos += 1;
            return Ok(inner);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.parse_number();
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            return self.parse_ident();
        }
        Err(Error::Parse {
            offset: self.pos,
            message: format!("unexpected character `{}`", c as char),
        })
    }

    fn parse_number(&mut self) -> Result<Node> {
        let start = self.pos;
        while self
            .src
            .get(self.pos)
            .is_some_and(|&c| c.is_ascii_digit() || c == b'.')
        {
            self.pos += 1;
        }
        if self.src.get(self.pos).is_some_and(|&c| c == b'e' || c == b'E') {
            let mut ahead = self.pos + 1;
            if self.src.get(ahead).is_some_and(|&c| c == b'+' || c == b'-') {
                ahead += 1;
            }
            if self.src.get(ahead).is_some_and(|c| c.is_ascii_digit()) {
                self.pos = ahead;
                while self.src.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice");
        text.parse::<f64>()
            .map(Node::Num)
            .map_err(|_| Error::Parse {
                offset: start,
                message: format!("invalid numeric literal `{text}`"),
            })
    }

    fn parse_ident(&mut self) -> Result<Node> {
        let start = self.pos;
        while self
            .src
            .get(self.pos)
            .is_some_and(|&c| c.is_ascii_alphanumeric() || c == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice");
        match name {
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            "e" => return Ok(Node::Num(std::f64::consts::E)),
            _ => {}
        }
        if let Some(func) = Func::from_name(name) {
            if self.peek() != Some(b'(') {
                return Err(Error::Parse {
                    offset: self.pos,
                    message: format!("expected `(` after function `{name}`"),
                });
            }
            self.pos += 1;
            let arg = self.parse_expr()?;
            if self.peek() != Some(b')') {
                return Err(Error::Parse {
                    offset: self.pos,
                    message: "expected `)`".into(),
                });
            }
            self.pos += 1;
            return Ok(Node::Call(func, Box::new(arg)));
        }
        if let Some(slot) = self.vars.iter().position(|v| *v == name) {
            return Ok(Node::Var {
                name: name.to_string(),
                slot,
            });
        }
        Err(Error::UnknownIdentifier {
            name: name.to_string(),
            offset: start,
        })
    }
}
