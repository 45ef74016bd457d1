//! Serialization of abstract models to PRISM and MRMC interchange formats,
//! plus value/policy CSV artifacts and SVG heatmaps. Includes re-parsers for
//! the emitted formats so round trips can be checked.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::abstraction::{AbstractModel, Transitions};
use crate::error::{Error, Result};
use crate::gridding::Partition;
use crate::verification::{Policy, ValueFunction};

/// Role of a file in an export bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileRole {
    Tra,
    Sta,
    Lab,
    PrismModule,
    ValuesCsv,
    PolicyCsv,
    HeatmapSvg,
}

/// One emitted file: suggested file name, role, and full content.
#[derive(Debug, Clone)]
pub struct ExportFile {
    pub path: String,
    pub role: FileRole,
    pub content: String,
}

/// A set of files produced by one export operation; state indexing is
/// consistent across all of them.
#[derive(Debug, Clone, Default)]
pub struct ExportBundle {
    pub files: Vec<ExportFile>,
}

impl ExportBundle {
    pub fn file(&self, path: &str) -> Option<&ExportFile> {
        self.files.iter().find(|f| f.path == path)
    }

    /// Write every file into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for f in &self.files {
            let path = dir.join(&f.path);
            std::fs::write(&path, &f.content)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Sorted label symbols attached to the model.
fn sorted_symbols(model: &AbstractModel) -> Vec<&String> {
    model.labels.keys().collect()
}

/// Coordinates printed for the absorbing state: just outside the domain,
/// one cell-free width beyond the upper corner, so the state is
/// representable in `.sta` without colliding with any real cell.
fn phi_coordinates(partition: &Partition) -> Vec<f64> {
    let d = partition.domain();
    (0..d.dim()).map(|i| d.upper()[i] + d.width(i)).collect()
}

fn tra_content(model: &AbstractModel) -> String {
    let states = model.num_states();
    let mut out = String::new();
    match &model.transitions {
        Transitions::Mc(rows) => {
            let nnz: usize = rows.iter().map(|r| r.iter().filter(|&&p| p != 0.0).count()).sum();
            let _ = writeln!(out, "{states} {nnz}");
            for (src, row) in rows.iter().enumerate() {
                for (dst, &p) in row.iter().enumerate() {
                    if p != 0.0 {
                        let _ = writeln!(out, "{src} {dst} {p}");
                    }
                }
            }
        }
        Transitions::Mdp(per_input) => {
            let q = per_input.len();
            let nnz: usize = per_input
                .iter()
                .flat_map(|m| m.iter())
                .map(|r| r.iter().filter(|&&p| p != 0.0).count())
                .sum();
            let _ = writeln!(out, "{states} {} {nnz}", states * q);
            for src in 0..states {
                for (choice, matrix) in per_input.iter().enumerate() {
                    for (dst, &p) in matrix[src].iter().enumerate() {
                        if p != 0.0 {
                            let _ = writeln!(out, "{src} {choice} {dst} {p}");
                        }
                    }
                }
            }
        }
    }
    out
}

fn sta_content(model: &AbstractModel) -> String {
    let n = model.partition.dim();
    let vars: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let mut out = format!("({})\n", vars.join(","));
    for (id, cell) in model.partition.cells().iter().enumerate() {
        let coords: Vec<String> = cell.representative().iter().map(|c| format!("{c}")).collect();
        let _ = writeln!(out, "{id}:({})", coords.join(","));
    }
    let phi: Vec<String> = phi_coordinates(&model.partition)
        .iter()
        .map(|c| format!("{c}"))
        .collect();
    let _ = writeln!(out, "{}:({})", model.absorbing_index(), phi.join(","));
    out
}

fn lab_content(model: &AbstractModel) -> String {
    let symbols = sorted_symbols(model);
    let mut header = String::from("0=\"init\"");
    for (i, sym) in symbols.iter().enumerate() {
        let _ = write!(header, " {}=\"{sym}\"", i + 1);
    }
    let phi_id = symbols.len() + 1;
    let _ = write!(header, " {phi_id}=\"phi\"");
    let mut out = header;
    out.push('\n');

    let mut per_state: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    per_state.entry(0).or_default().push(0);
    for (i, sym) in symbols.iter().enumerate() {
        for &state in &model.labels[sym.as_str()] {
            per_state.entry(state).or_default().push(i + 1);
        }
    }
    per_state
        .entry(model.absorbing_index())
        .or_default()
        .push(phi_id);
    for (state, mut ids) in per_state {
        ids.sort_unstable();
        let ids: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(out, "{state}: {}", ids.join(" "));
    }
    out
}

/// PRISM explicit-engine export: `.tra` transitions, `.sta` state
/// coordinates and `.lab` labels, 0-indexed with the absorbing state last.
pub fn write_prism_explicit(model: &AbstractModel) -> ExportBundle {
    ExportBundle {
        files: vec![
            ExportFile {
                path: "model.tra".into(),
                role: FileRole::Tra,
                content: tra_content(model),
            },
            ExportFile {
                path: "model.sta".into(),
                role: FileRole::Sta,
                content: sta_content(model),
            },
            ExportFile {
                path: "model.lab".into(),
                role: FileRole::Lab,
                content: lab_content(model),
            },
        ],
    }
}

fn updates_line(row: &[f64]) -> String {
    let updates: Vec<String> = row
        .iter()
        .enumerate()
        .filter(|(_, &p)| p != 0.0)
        .map(|(dst, &p)| format!("{p}:(z'={dst})"))
        .collect();
    updates.join(" + ")
}

/// PRISM module-language export: one integer state variable, one guarded
/// command per state (per input for MDPs), one `label` line per symbol.
pub fn write_prism_module(model: &AbstractModel) -> ExportBundle {
    let p = model.absorbing_index();
    let mut out = String::new();
    let kind = if model.is_mdp() { "mdp" } else { "dtmc" };
    let _ = writeln!(out, "{kind}\n");
    let _ = writeln!(out, "module abstraction");
    let _ = writeln!(out, "  z : [0..{p}] init 0;\n");
    match &model.transitions {
        Transitions::Mc(rows) => {
            for (src, row) in rows.iter().enumerate() {
                let _ = writeln!(out, "  [] z={src} -> {};", updates_line(row));
            }
        }
        Transitions::Mdp(per_input) => {
            for src in 0..=p {
                for (choice, matrix) in per_input.iter().enumerate() {
                    let _ = writeln!(out, "  [u{choice}] z={src} -> {};", updates_line(&matrix[src]));
                }
            }
        }
    }
    let _ = writeln!(out, "endmodule");
    let mut labels = String::new();
    for sym in sorted_symbols(model) {
        let states = &model.labels[sym.as_str()];
        let terms: Vec<String> = states.iter().map(|z| format!("z={z}")).collect();
        let rhs = if terms.is_empty() { "false".to_string() } else { terms.join(" | ") };
        let _ = writeln!(labels, "label \"{sym}\" = {rhs};");
    }
    let _ = writeln!(labels, "label \"phi\" = z={p};");
    if !labels.is_empty() {
        out.push('\n');
        out.push_str(&labels);
    }
    ExportBundle {
        files: vec![ExportFile {
            path: "model.prism".into(),
            role: FileRole::PrismModule,
            content: out,
        }],
    }
}

/// MRMC DTMC export: `.tra` with STATES/TRANSITIONS headers (1-indexed) and
/// a declaration-style `.lab`. MDPs are not representable in this format.
pub fn write_mrmc(model: &AbstractModel) -> Result<ExportBundle> {
    let rows = match &model.transitions {
        Transitions::Mc(rows) => rows,
        Transitions::Mdp(_) => {
            return Err(Error::UnsupportedVariant(
                "MRMC export supports MCs only; use the PRISM exports for MDPs".into(),
            ))
        }
    };
    let states = model.num_states();
    let nnz: usize = rows.iter().map(|r| r.iter().filter(|&&p| p != 0.0).count()).sum();
    let mut tra = format!("STATES {states}\nTRANSITIONS {nnz}\n");
    for (src, row) in rows.iter().enumerate() {
        for (dst, &p) in row.iter().enumerate() {
            if p != 0.0 {
                let _ = writeln!(tra, "{} {} {p}", src + 1, dst + 1);
            }
        }
    }

    let symbols = sorted_symbols(model);
    let mut lab = String::from("#DECLARATION\n");
    let mut decl: Vec<String> = symbols.iter().map(|s| s.to_string()).collect();
    decl.push("phi".into());
    lab.push_str(&decl.join(" "));
    lab.push_str("\n#END\n");
    let mut per_state: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for sym in &symbols {
        for &state in &model.labels[sym.as_str()] {
            per_state.entry(state + 1).or_default().push(sym.to_string());
        }
    }
    per_state
        .entry(model.absorbing_index() + 1)
        .or_default()
        .push("phi".into());
    for (state, syms) in per_state {
        let _ = writeln!(lab, "{state} {}", syms.join(" "));
    }
    Ok(ExportBundle {
        files: vec![
            ExportFile {
                path: "mrmc.tra".into(),
                role: FileRole::Tra,
                content: tra,
            },
            ExportFile {
                path: "mrmc.lab".into(),
                role: FileRole::Lab,
                content: lab,
            },
        ],
    })
}

fn csv_number(x: f64) -> String {
    format!("{x}")
}

fn values_csv(values: &ValueFunction, partition: &Partition) -> String {
    let n = partition.dim();
    let mut header = vec!["state".to_string()];
    for prefix in ["lower", "upper", "rep"] {
        for d in 1..=n {
            header.push(format!("{prefix}_{d}"));
        }
    }
    header.push("value".into());
    let mut out = header.join(",");
    out.push('\n');
    for (id, cell) in partition.cells().iter().enumerate() {
        let mut fields = vec![id.to_string()];
        let b = cell.bounds();
        fields.extend(b.lower().iter().map(|&x| csv_number(x)));
        fields.extend(b.upper().iter().map(|&x| csv_number(x)));
        fields.extend(cell.representative().iter().map(|&x| csv_number(x)));
        fields.push(csv_number(values.v0()[id]));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn policy_csv(policy: &Policy, partition: &Partition, input_partition: &Partition) -> String {
    let m = input_partition.dim();
    let mut header = vec!["step".to_string(), "state".into(), "input_index".into()];
    for d in 1..=m {
        header.push(format!("input_rep_{d}"));
    }
    let mut out = header.join(",");
    out.push('\n');
    for (step, row) in policy.choice.iter().enumerate() {
        for (state, &input) in row.iter().enumerate().take(partition.cells().len()) {
            let mut fields = vec![step.to_string(), state.to_string(), input.to_string()];
            let rep = input_partition.cells()[input].representative();
            fields.extend(rep.iter().map(|&x| csv_number(x)));
            out.push_str(&fields.join(","));
            out.push('\n');
        }
    }
    out
}

/// Linear ramp over [0,1]: light gray at 0 up to a saturated blue at 1.
fn ramp_color(value: f64) -> String {
    let t = value.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + t * (b - a)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(247.0, 5.0), lerp(247.0, 48.0), lerp(247.0, 97.0))
}

/// SVG heatmap of `V_0` over a 1D or 2D partition; higher dimensions are not
/// drawable in this format.
pub fn heatmap_svg(values: &ValueFunction, partition: &Partition) -> Result<String> {
    let n = partition.dim();
    if n > 2 {
        return Err(Error::UnsupportedVariant(format!(
            "heatmap requires a 1D or 2D state space, got {n}D; the CSV export covers it"
        )));
    }
    let domain = partition.domain();
    let (w, h) = (640.0, 480.0);
    let (x0, x1) = (domain.lower()[0], domain.upper()[0]);
    let (y0, y1) = if n == 2 {
        (domain.lower()[1], domain.upper()[1])
    } else {
        (0.0, 1.0)
    };
    let sx = w / (x1 - x0);
    let sy = h / (y1 - y0);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
        w + 80.0,
        h,
        w + 80.0,
        h
    );
    for (id, cell) in partition.cells().iter().enumerate() {
        let b = cell.bounds();
        let rx = (b.lower()[0] - x0) * sx;
        let rw = b.width(0) * sx;
        let (ry, rh) = if n == 2 {
            // SVG's y axis grows downward.
            ((y1 - b.upper()[1]) * sy, b.width(1) * sy)
        } else {
            (0.0, h)
        };
        let _ = writeln!(
            out,
            "<rect x=\"{rx}\" y=\"{ry}\" width=\"{rw}\" height=\"{rh}\" fill=\"{}\"><title>state {id}: {}</title></rect>",
            ramp_color(values.v0()[id]),
            values.v0()[id]
        );
    }
    // Colorbar with end labels.
    let steps = 32;
    for i in 0..steps {
        let t = i as f64 / (steps - 1) as f64;
        let y = h - (i + 1) as f64 * h / steps as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{}\" y=\"{y}\" width=\"20\" height=\"{}\" fill=\"{}\"/>",
            w + 20.0,
            h / steps as f64,
            ramp_color(t)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"12\" font-size=\"12\">1</text>",
        w + 44.0
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\">0</text>",
        w + 44.0,
        h - 2.0
    );
    out.push_str("</svg>\n");
    Ok(out)
}

/// Value CSV, optional policy CSV, and (for 1D/2D spaces) an SVG heatmap.
pub fn write_results(
    values: &ValueFunction,
    policy: Option<(&Policy, &Partition)>,
    partition: &Partition,
) -> ExportBundle {
    let mut files = vec![ExportFile {
        path: "values.csv".into(),
        role: FileRole::ValuesCsv,
        content: values_csv(values, partition),
    }];
    if let Some((policy, input_partition)) = policy {
        files.push(ExportFile {
            path: "policy.csv".into(),
            role: FileRole::PolicyCsv,
            content: policy_csv(policy, partition, input_partition),
        });
    }
    if let Ok(svg) = heatmap_svg(values, partition) {
        files.push(ExportFile {
            path: "heatmap.svg".into(),
            role: FileRole::HeatmapSvg,
            content: svg,
        });
    }
    ExportBundle { files }
}

/// An explicit-format model read back from `.tra`/`.sta`/`.lab` text.
#[derive(Debug, Clone)]
pub struct ParsedExplicit {
    pub transitions: Transitions,
    /// Per-state coordinates from `.sta`, absorbing state included.
    pub coordinates: Vec<Vec<f64>>,
    pub labels: BTreeMap<String, BTreeSet<usize>>,
}

fn parse_err(what: &str, line: &str) -> Error {
    Error::Io(std::io::Error::new(
        std::io::ErrorKind::InvalidData,
        format!("{what}: `{line}`"),
    ))
}

/// Re-parser for [`write_prism_explicit`] output (round-trip checks).
pub fn read_prism_explicit(tra: &str, sta: &str, lab: &str) -> Result<ParsedExplicit> {
    let mut lines = tra.lines();
    let header = lines.next().ok_or_else(|| parse_err("empty .tra", ""))?;
    let head: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err("bad .tra header", header)))
        .collect::<Result<_>>()?;
    let transitions = match head.len() {
        2 => {
            let states = head[0];
            let mut rows = vec![vec![0.0; states]; states];
            for line in lines {
                let mut it = line.split_whitespace();
                let src: usize = it.next().ok_or_else(|| parse_err("bad line", line))?.parse().map_err(|_| parse_err("bad src", line))?;
                let dst: usize = it.next().ok_or_else(|| parse_err("bad line", line))?.parse().map_err(|_| parse_err("bad dst", line))?;
                let p: f64 = it.next().ok_or_else(|| parse_err("bad line", line))?.parse().map_err(|_| parse_err("bad prob", line))?;
                rows[src][dst] = p;
            }
            Transitions::Mc(rows)
        }
        3 => {
            let states = head[0];
            let q = head[1] / states;
            let mut per_input = vec![vec![vec![0.0; states]; states]; q];
            for line in lines {
                let mut it = line.split_whitespace();
                let src: usize = it.next().ok_or_else(|| parse_err("bad line", line))?.parse().map_err(|_| parse_err("bad src", line))?;
                let choice: usize = it.next().ok_or_else(|| parse_err("bad line", line))?.parse().map_err(|_| parse_err("bad choice", line))?;
                let dst: usize = it.next().ok_or_else(|| parse_err("bad line", line))?.parse().map_err(|_| parse_err("bad dst", line))?;
                let p: f64 = it.next().ok_or_else(|| parse_err("bad line", line))?.parse().map_err(|_| parse_err("bad prob", line))?;
                per_input[choice][src][dst] = p;
            }
            Transitions::Mdp(per_input)
        }
        _ => return Err(parse_err("unrecognized .tra header", header)),
    };

    let mut coordinates = Vec::new();
    for line in sta.lines().skip(1) {
        let (_, rest) = line.split_once(":(").ok_or_else(|| parse_err("bad .sta line", line))?;
        let coords = rest.trim_end_matches(')');
        let point: Vec<f64> = coords
            .split(',')
            .map(|t| t.parse().map_err(|_| parse_err("bad coordinate", line)))
            .collect::<Result<_>>()?;
        coordinates.push(point);
    }

    let mut lab_lines = lab.lines();
    let decl = lab_lines.next().ok_or_else(|| parse_err("empty .lab", ""))?;
    let mut names: BTreeMap<usize, String> = BTreeMap::new();
    for token in decl.split_whitespace() {
        let (id, name) = token.split_once('=').ok_or_else(|| parse_err("bad .lab decl", decl))?;
        let id: usize = id.parse().map_err(|_| parse_err("bad label id", decl))?;
        names.insert(id, name.trim_matches('"').to_string());
    }
    let mut labels: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for line in lab_lines {
        let (state, ids) = line.split_once(':').ok_or_else(|| parse_err("bad .lab line", line))?;
        let state: usize = state.trim().parse().map_err(|_| parse_err("bad state id", line))?;
        for id in ids.split_whitespace() {
            let id: usize = id.parse().map_err(|_| parse_err("bad label id", line))?;
            let name = names.get(&id).ok_or_else(|| parse_err("undeclared label", line))?;
            labels.entry(name.clone()).or_default().insert(state);
        }
    }
    // The synthetic markers are not model labels.
    labels.remove("init");
    labels.remove("phi");
    Ok(ParsedExplicit {
        transitions,
        coordinates,
        labels,
    })
}

/// A module-language model read back from `.prism` text.
#[derive(Debug, Clone)]
pub struct ParsedModule {
    pub is_mdp: bool,
    pub transitions: Transitions,
    pub labels: BTreeMap<String, BTreeSet<usize>>,
}

/// Re-parser for [`write_prism_module`] output (round-trip checks).
pub fn read_prism_module(text: &str) -> Result<ParsedModule> {
    let mut is_mdp = false;
    let mut states = 0usize;
    // (input index or 0, src, updates)
    let mut commands: Vec<(usize, usize, Vec<(usize, f64)>)> = Vec::new();
    let mut labels: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for raw in text.lines() {
        let line = raw.trim();
        if line == "mdp" {
            is_mdp = true;
        } else if let Some(rest) = line.strip_prefix("z : [0..") {
            let (p, _) = rest.split_once(']').ok_or_else(|| parse_err("bad var decl", line))?;
            states = p.parse::<usize>().map_err(|_| parse_err("bad var bound", line))? + 1;
        } else if line.starts_with('[') && line.contains("->") {
            let (head, tail) = line.split_once("->").unwrap();
            let close = head.find(']').ok_or_else(|| parse_err("bad command", line))?;
            let action = &head[1..close];
            let input = if action.is_empty() {
                0
            } else {
                action
                    .trim_start_matches('u')
                    .parse()
                    .map_err(|_| parse_err("bad action", line))?
            };
            let guard = head[close + 1..].trim();
            let src: usize = guard
                .strip_prefix("z=")
                .ok_or_else(|| parse_err("bad guard", line))?
                .parse()
                .map_err(|_| parse_err("bad guard", line))?;
            let mut updates = Vec::new();
            for term in tail.trim_end_matches(';').split('+') {
                let (prob, upd) = term.split_once(':').ok_or_else(|| parse_err("bad update", line))?;
                let p: f64 = prob.trim().parse().map_err(|_| parse_err("bad probability", line))?;
                let dst: usize = upd
                    .trim()
                    .trim_start_matches("(z'=")
                    .trim_end_matches(')')
                    .parse()
                    .map_err(|_| parse_err("bad target", line))?;
                updates.push((dst, p));
            }
            commands.push((input, src, updates));
        } else if let Some(rest) = line.strip_prefix("label ") {
            let (name, expr) = rest.split_once('=').ok_or_else(|| parse_err("bad label", line))?;
            let name = name.trim().trim_matches('"').to_string();
            let mut set = BTreeSet::new();
            let expr = expr.trim().trim_end_matches(';');
            if expr != "false" {
                for term in expr.split('|') {
                    let z: usize = term
                        .trim()
                        .strip_prefix("z=")
                        .ok_or_else(|| parse_err("bad label term", line))?
                        .parse()
                        .map_err(|_| parse_err("bad label state", line))?;
                    set.insert(z);
                }
            }
            labels.insert(name, set);
        }
    }
    if states == 0 {
        return Err(parse_err("no state variable declaration found", ""));
    }
    let q = commands.iter().map(|&(input, _, _)| input + 1).max().unwrap_or(1);
    let transitions = if is_mdp {
        let mut per_input = vec![vec![vec![0.0; states]; states]; q];
        for (input, src, updates) in commands {
            for (dst, p) in updates {
                per_input[input][src][dst] = p;
            }
        }
        Transitions::Mdp(per_input)
    } else {
        let mut rows = vec![vec![0.0; states]; states];
        for (_, src, updates) in commands {
            for (dst, p) in updates {
                rows[src][dst] = p;
            }
        }
        Transitions::Mc(rows)
    };
    labels.remove("phi");
    Ok(ParsedModule {
        is_mdp,
        transitions,
        labels,
    })
}
