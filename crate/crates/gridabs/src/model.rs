//! Continuous-state model definition: state/input spaces, kernel families,
//! and conditional density evaluation.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::expr::{parse_expression, Expr};

/// Maximum state/input dimension; the abstraction is exponential in it.
pub const MAX_DIM: usize = 8;

/// An axis-aligned box with strictly positive width in every dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Rect {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Rect {
    pub fn new(bounds: &[(f64, f64)]) -> Result<Rect> {
        if bounds.is_empty() {
            return Err(Error::InvalidModel("box must have at least one dimension".into()));
        }
        if bounds.len() > MAX_DIM {
            return Err(Error::InvalidModel(format!(
                "dimension {} exceeds the supported maximum of {MAX_DIM}",
                bounds.len()
            )));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::InvalidModel(format!(
                    "dimension {i}: bounds [{lo}, {hi}] must be finite with lower < upper"
                )));
            }
        }
        Ok(Rect {
            lower: bounds.iter().map(|b| b.0).collect(),
            upper: bounds.iter().map(|b| b.1).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|d| self.width(d)).product()
    }

    /// Euclidean length of the main diagonal.
    pub fn diameter(&self) -> f64 {
        (0..self.dim())
            .map(|d| self.width(d).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|d| 0.5 * (self.lower[d] + self.upper[d]))
            .collect()
    }

    /// Closed-box membership (boundary points included).
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && (0..self.dim()).all(|d| point[d] >= self.lower[d] && point[d] <= self.upper[d])
    }

    /// All 2^n corner points.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|d| {
                        if mask >> d & 1 == 1 {
                            self.upper[d]
                        } else {
                            self.lower[d]
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Uniform lattice with `k` points per dimension, endpoints included.
    pub fn lattice(&self, k: usize) -> Vec<Vec<f64>> {
        let n = self.dim();
        let k = k.max(2);
        let mut points = Vec::with_capacity(k.pow(n as u32));
        let mut idx = vec![0usize; n];
        loop {
            points.push(
                (0..n)
                    .map(|d| self.lower[d] + self.width(d) * idx[d] as f64 / (k - 1) as f64)
                    .collect(),
            );
            let mut d = 0;
            loop {
                if d == n {
                    return points;
                }
                idx[d] += 1;
                if idx[d] < k {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| (lo, hi))
            .collect()
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &Rect) -> Result<Rect> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch("hull of boxes with different dims".into()));
        }
        let bounds: Vec<(f64, f64)> = (0..self.dim())
            .map(|d| {
                (
                    self.lower[d].min(other.lower[d]),
                    self.upper[d].max(other.upper[d]),
                )
            })
            .collect();
        Rect::new(&bounds)
    }
}

/// The transition-kernel families.
#[derive(Debug, Clone)]
pub enum Kernel {
    /// `s(k+1) = A s(k) + B + G u(k) + eta`, `eta ~ N(0, Sigma)`.
    LinearGaussian {
        a: DMatrix<f64>,
        b: DVector<f64>,
        sigma: DMatrix<f64>,
        input: Option<DMatrix<f64>>,
    },
    /// `s(k+1) = f(s,u) + g(s,u) eta`, `eta ~ N(0, I)`; covariance `g g^T`.
    NonlinearGaussian {
        n: usize,
        m: usize,
        drift: Vec<Expr>,
        variance: Vec<Vec<Expr>>,
    },
    /// A normalized conditional density over `s1..sn, sb1..sbn, u1..um`.
    UserDensity { n: usize, m: usize, density: Expr },
}

/// Variable names for state, next-state and input slots.
pub fn state_vars(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("s{i}")).collect()
}

pub fn next_state_vars(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("sb{i}")).collect()
}

pub fn input_vars(m: usize) -> Vec<String> {
    (1..=m).map(|i| format!("u{i}")).collect()
}

fn drift_var_names(n: usize, m: usize) -> Vec<String> {
    let mut v = state_vars(n);
    v.extend(input_vars(m));
    v
}

fn density_var_names(n: usize, m: usize) -> Vec<String> {
    let mut v = state_vars(n);
    v.extend(next_state_vars(n));
    v.extend(input_vars(m));
    v
}

impl Kernel {
    /// Parse a nonlinear-Gaussian kernel from drift and variance expression texts.
    pub fn nonlinear_gaussian(n: usize, m: usize, drift: &[&str], variance: &[Vec<&str>]) -> Result<Kernel> {
        if drift.len() != n || variance.len() != n || variance.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "nonlinear-Gaussian kernel needs {n} drift entries and a {n}x{n} variance matrix"
            )));
        }
        let names = drift_var_names(n, m);
        let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let drift = drift
            .iter()
            .map(|text| parse_expression(text, &name_refs))
            .collect::<Result<Vec<_>>>()?;
        let variance = variance
            .iter()
            .map(|row| {
                row.iter()
                    .map(|text| parse_expression(text, &name_refs))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Kernel::NonlinearGaussian { n, m, drift, variance })
    }

    /// Parse a user-defined density `t(sb | s, u)`.
    pub fn user_density(n: usize, m: usize, text: &str) -> Result<Kernel> {
        let names = density_var_names(n, m);
        let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let density = parse_expression(text, &name_refs)?;
        Ok(Kernel::UserDensity { n, m, density })
    }

    pub fn state_dim(&self) -> usize {
        match self {
            Kernel::LinearGaussian { a, .. } => a.nrows(),
            Kernel::NonlinearGaussian { n, .. } | Kernel::UserDensity { n, .. } => *n,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Kernel::LinearGaussian { input, .. } => input.as_ref().map_or(0, |g| g.ncols()),
            Kernel::NonlinearGaussian { m, .. } | Kernel::UserDensity { m, .. } => *m,
        }
    }

    /// True if the density genuinely varies with the current state.
    pub fn depends_on_state(&self) -> bool {
        match self {
            Kernel::LinearGaussian { a, .. } => a.iter().any(|&v| v != 0.0),
            Kernel::NonlinearGaussian { n, drift, variance, .. } => {
                let names = state_vars(*n);
                let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
                drift.iter().any(|e| !e.independent_of(&refs))
                    || variance
                        .iter()
                        .any(|row| row.iter().any(|e| !e.independent_of(&refs)))
            }
            Kernel::UserDensity { n, density, .. } => {
                let names = state_vars(*n);
                let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
                !density.independent_of(&refs)
            }
        }
    }

    /// True if the density varies with the input.
    pub fn depends_on_input(&self) -> bool {
        match self {
            Kernel::LinearGaussian { input, .. } => {
                input.as_ref().is_some_and(|g| g.iter().any(|&v| v != 0.0))
            }
            Kernel::NonlinearGaussian { m, drift, variance, .. } => {
                let names = input_vars(*m);
                let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
                drift.iter().any(|e| !e.independent_of(&refs))
                    || variance
                        .iter()
                        .any(|row| row.iter().any(|e| !e.independent_of(&refs)))
            }
            Kernel::UserDensity { m, density, .. } => {
                let names = input_vars(*m);
                let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
                !density.independent_of(&refs)
            }
        }
    }

    pub fn is_gaussian(&self) -> bool {
        !matches!(self, Kernel::UserDensity { .. })
    }

    /// Freeze the next-state distribution at `(s, u)`.
    pub fn next_dist(&self, s: &[f64], u: Option<&[f64]>) -> Result<NextDist<'_>> {
        let n = self.state_dim();
        if s.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "state has {} entries, kernel expects {n}",
                s.len()
            )));
        }
        match self {
            Kernel::LinearGaussian { a, b, sigma, input } => {
                let mut mean = a * DVector::from_column_slice(s) + b;
                if let (Some(g), Some(u)) = (input, u) {
                    mean += g * DVector::from_column_slice(u);
                }
                NextDist::gaussian(mean, sigma.clone())
            }
            Kernel::NonlinearGaussian { n, m, drift, variance } => {
                let mut slots = Vec::with_capacity(n + m);
                slots.extend_from_slice(s);
                slots.extend_from_slice(u.unwrap_or(&[]));
                if slots.len() != n + m {
                    return Err(Error::DimensionMismatch(format!(
                        "kernel expects {m} input entries"
                    )));
                }
                let mean = DVector::from_iterator(
                    *n,
                    drift.iter().map(|e| e.eval(&slots)).collect::<Result<Vec<_>>>()?,
                );
                let mut g = DMatrix::zeros(*n, *n);
                for i in 0..*n {
                    for j in 0..*n {
                        g[(i, j)] = variance[i][j].eval(&slots)?;
                    }
                }
                let cov = &g * g.transpose();
                NextDist::gaussian(mean, cov)
            }
            Kernel::UserDensity { n, m, density } => Ok(NextDist::Density {
                n: *n,
                m: *m,
                density,
                s: s.to_vec(),
                u: u.map(|u| u.to_vec()),
            }),
        }
    }
}

/// Next-state distribution frozen at a source state (and input).
pub enum NextDist<'a> {
    Gaussian {
        mean: DVector<f64>,
        cov: DMatrix<f64>,
        chol: Cholesky<f64, Dyn>,
        /// Per-dimension standard deviations if the covariance is diagonal.
        diag_std: Option<Vec<f64>>,
        log_norm: f64,
    },
    Density {
        n: usize,
        m: usize,
        density: &'a Expr,
        s: Vec<f64>,
        u: Option<Vec<f64>>,
    },
}

impl<'a> NextDist<'a> {
    fn gaussian(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<NextDist<'a>> {
        let n = mean.len();
        let chol = Cholesky::new(cov.clone()).ok_or_else(|| {
            Error::SingularKernel("covariance is not positive-definite".into())
        })?;
        let log_det: f64 = (0..n).map(|i| chol.l_dirty()[(i, i)].ln()).sum::<f64>() * 2.0;
        let log_norm = -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        let max_off = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| cov[(i, j)].abs())
            .fold(0.0f64, f64::max);
        let scale = (0..n).map(|i| cov[(i, i)].abs()).fold(0.0f64, f64::max);
        let diag_std = if max_off <= 1e-12 * scale.max(1.0) {
            Some((0..n).map(|i| cov[(i, i)].sqrt()).collect())
        } else {
            None
        };
        Ok(NextDist::Gaussian {
            mean,
            cov,
            chol,
            diag_std,
            log_norm,
        })
    }

    /// Density of the next state at `x`.
    pub fn pdf(&self, x: &[f64]) -> Result<f64> {
        match self {
            NextDist::Gaussian { mean, chol, log_norm, .. } => {
                let mut d = DVector::from_column_slice(x) - mean;
                chol.l_dirty().solve_lower_triangular_mut(&mut d);
                Ok((log_norm - 0.5 * d.norm_squared()).exp())
            }
            NextDist::Density { n, m, density, s, u } => {
                let mut slots = Vec::with_capacity(2 * n + m);
                slots.extend_from_slice(s);
                slots.extend_from_slice(x);
                slots.extend_from_slice(u.as_deref().unwrap_or(&[]));
                let v = density.eval(&slots)?;
                if v < 0.0 {
                    return Err(Error::Eval {
                        node: density.to_string(),
                        message: format!("density evaluated to negative value {v}"),
                    });
                }
                Ok(v)
            }
        }
    }

    pub fn gaussian_parts(&self) -> Option<(&DVector<f64>, &DMatrix<f64>, Option<&[f64]>)> {
        match self {
            NextDist::Gaussian { mean, cov, diag_std, .. } => {
                Some((mean, cov, diag_std.as_deref()))
            }
            NextDist::Density { .. } => None,
        }
    }
}

/// A continuous-state model: state space, optional input space, kernel.
#[derive(Debug, Clone)]
pub struct Model {
    pub state_space: Rect,
    pub input_space: Option<Rect>,
    pub kernel: Kernel,
}

impl Model {
    pub fn new(state_space: Rect, input_space: Option<Rect>, kernel: Kernel) -> Model {
        Model {
            state_space,
            input_space,
            kernel,
        }
    }

    pub fn is_controlled(&self) -> bool {
        self.input_space.is_some()
    }
}

/// Result of `validate_model`: empty means valid.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check dimensional consistency, covariance positive-definiteness and
/// expression arity; returns a report rather than failing fast.
pub fn validate_model(model: &Model) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = model.state_space.dim();
    let m = model.input_space.as_ref().map_or(0, Rect::dim);

    match &model.kernel {
        Kernel::LinearGaussian { a, b, sigma, input } => {
            if a.nrows() != n || a.ncols() != n {
                report.violations.push(format!(
                    "A is {}x{}, expected {n}x{n}",
                    a.nrows(),
                    a.ncols()
                ));
            }
            if b.len() != n {
                report
                    .violations
                    .push(format!("B has {} entries, expected {n}", b.len()));
            }
            if sigma.nrows() != n || sigma.ncols() != n {
                report.violations.push(format!(
                    "Sigma is {}x{}, expected {n}x{n}",
                    sigma.nrows(),
                    sigma.ncols()
                ));
            } else {
                let asym = (sigma - sigma.transpose()).abs().max();
                if asym > 1e-9 * sigma.abs().max().max(1.0) {
                    report.violations.push("Sigma not symmetric".into());
                } else if Cholesky::new(sigma.clone()).is_none() {
                    report.violations.push("Sigma not positive-definite".into());
                }
            }
            match input {
                Some(g) => {
                    if model.input_space.is_none() {
                        report
                            .violations
                            .push("input matrix G given but the model has no input space".into());
                    } else if g.nrows() != n || g.ncols() != m {
                        report.violations.push(format!(
                            "G is {}x{}, expected {n}x{m}",
                            g.nrows(),
                            g.ncols()
                        ));
                    }
                }
                None => {}
            }
        }
        Kernel::NonlinearGaussian { n: kn, m: km, drift, variance } => {
            if *kn != n {
                report
                    .violations
                    .push(format!("kernel state dimension {kn} != state space dimension {n}"));
            }
            if *km != m {
                report
                    .violations
                    .push(format!("kernel input dimension {km} != input space dimension {m}"));
            }
            if drift.len() != *kn {
                report
                    .violations
                    .push(format!("drift has {} entries, expected {kn}", drift.len()));
            }
            if variance.len() != *kn || variance.iter().any(|row| row.len() != *kn) {
                report
                    .violations
                    .push(format!("variance matrix is not {kn}x{kn}"));
            }
            if model.input_space.is_none() && model.kernel.depends_on_input() {
                report.violations.push("unbound input variable".into());
            }
        }
        Kernel::UserDensity { n: kn, m: km, density } => {
            if *kn != n {
                report
                    .violations
                    .push(format!("kernel state dimension {kn} != state space dimension {n}"));
            }
            if *km != m {
                report
                    .violations
                    .push(format!("kernel input dimension {km} != input space dimension {m}"));
            }
            if model.input_space.is_none() && model.kernel.depends_on_input() {
                report.violations.push("unbound input variable".into());
            }
            // Spot-check nonnegativity on a coarse lattice over S x S (x U).
            // Only meaningful when the dimensions line up.
            if *kn != n || *km != m {
                return report;
            }
            'outer: for s in model.state_space.lattice(3) {
                for sb in model.state_space.lattice(3) {
                    let us: Vec<Option<Vec<f64>>> = match &model.input_space {
                        Some(uspace) => uspace.lattice(2).into_iter().map(Some).collect(),
                        None => vec![None],
                    };
                    for u in us {
                        let mut slots = Vec::new();
                        slots.extend_from_slice(&s);
                        slots.extend_from_slice(&sb);
                        slots.extend_from_slice(u.as_deref().unwrap_or(&[]));
                        if let Ok(v) = density.eval(&slots) {
                            if v < 0.0 {
                                report.violations.push(format!(
                                    "density is negative ({v}) at sampled point {slots:?}"
                                ));
                                break 'outer;
                            }
                        }
                    }
                }
            }
        }
    }
    report
}

/// Evaluate the conditional density `t(s_next | s, u)`.
pub fn eval_density(kernel: &Kernel, s_next: &[f64], s: &[f64], u: Option<&[f64]>) -> Result<f64> {
    kernel.next_dist(s, u)?.pdf(s_next)
}

/// Mean and covariance of the next-state distribution (Gaussian variants only).
pub fn gaussian_mean_cov(
    kernel: &Kernel,
    s: &[f64],
    u: Option<&[f64]>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if !kernel.is_gaussian() {
        return Err(Error::UnsupportedVariant(
            "gaussian_mean_cov requires a Gaussian kernel".into(),
        ));
    }
    match kernel.next_dist(s, u)? {
        NextDist::Gaussian { mean, cov, .. } => Ok((mean, cov)),
        NextDist::Density { .. } => unreachable!("Gaussian kernels freeze to Gaussian dists"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_gaussian_1d() -> Kernel {
        Kernel::LinearGaussian {
            a: DMatrix::from_row_slice(1, 1, &[1.0]),
            b: DVector::from_column_slice(&[0.0]),
            sigma: DMatrix::from_row_slice(1, 1, &[1.0]),
            input: None,
        }
    }

    #[test]
    fn rect_rejects_zero_width() {
        assert!(Rect::new(&[(0.0, 0.0)]).is_err());
        assert!(Rect::new(&[(1.0, 0.0)]).is_err());
        assert!(Rect::new(&[(0.0, 1.0), (2.0, 3.0)]).is_ok());
    }

    #[test]
    fn rect_rejects_high_dimension() {
        let bounds = vec![(0.0, 1.0); 9];
        assert!(Rect::new(&bounds).is_err());
    }

    #[test]
    fn rect_geometry() {
        let r = Rect::new(&[(0.0, 1.0), (0.0, 2.0)]).unwrap();
        assert_eq!(r.volume(), 2.0);
        assert_relative_eq!(r.diameter(), 5.0f64.sqrt());
        assert_eq!(r.center(), vec![0.5, 1.0]);
        assert_eq!(r.vertices().len(), 4);
    }

    #[test]
    fn validate_consistent_linear_gaussian() {
        let model = Model::new(
            Rect::new(&[(0.0, 1.0), (0.0, 1.0)]).unwrap(),
            None,
            Kernel::LinearGaussian {
                a: DMatrix::identity(2, 2),
                b: DVector::zeros(2),
                sigma: DMatrix::identity(2, 2),
                input: None,
            },
        );
        assert!(validate_model(&model).is_valid());
    }

    #[test]
    fn validate_flags_non_pd_sigma() {
        let model = Model::new(
            Rect::new(&[(0.0, 1.0), (0.0, 1.0)]).unwrap(),
            None,
            Kernel::LinearGaussian {
                a: DMatrix::identity(2, 2),
                b: DVector::zeros(2),
                sigma: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
                input: None,
            },
        );
        let report = validate_model(&model);
        assert!(report
            .violations
            .iter()
            .any(|v| v.contains("not positive-definite")));
    }

    #[test]
    fn validate_flags_unbound_input_variable() {
        let kernel = Kernel::user_density(1, 1, "1 + 0*u1").unwrap();
        let model = Model::new(Rect::new(&[(0.0, 1.0)]).unwrap(), None, kernel);
        let report = validate_model(&model);
        assert!(report.violations.iter().any(|v| v.contains("unbound input")));
    }

    #[test]
    fn standard_normal_density_at_zero() {
        let v = eval_density(&unit_gaussian_1d(), &[0.0], &[0.0], None).unwrap();
        assert_relative_eq!(v, 0.3989422804014327, max_relative = 1e-12);
    }

    #[test]
    fn constant_user_density() {
        let kernel = Kernel::user_density(1, 0, "1").unwrap();
        for (sb, s) in [(0.1, 0.9), (0.5, 0.5), (0.99, 0.01)] {
            assert_eq!(eval_density(&kernel, &[sb], &[s], None).unwrap(), 1.0);
        }
    }

    #[test]
    fn nonlinear_family_embeds_linear() {
        let nl = Kernel::nonlinear_gaussian(1, 0, &["s1"], &[vec!["1"]]).unwrap();
        let lin = unit_gaussian_1d();
        let mut x = 0.17f64;
        for _ in 0..1000 {
            x = (x * 4.0).sin(); // cheap deterministic scatter in [-1, 1]
            let s = x;
            let sb = (x * 2.7).cos();
            let a = eval_density(&nl, &[sb], &[s], None).unwrap();
            let b = eval_density(&lin, &[sb], &[s], None).unwrap();
            assert!((a - b).abs() < 1e-12, "mismatch at s={s} sb={sb}");
        }
    }

    #[test]
    fn gaussian_mean_cov_identity() {
        let kernel = Kernel::LinearGaussian {
            a: DMatrix::identity(2, 2),
            b: DVector::zeros(2),
            sigma: DMatrix::identity(2, 2),
            input: None,
        };
        let (mean, cov) = gaussian_mean_cov(&kernel, &[1.0, 2.0], None).unwrap();
        assert_eq!(mean.as_slice(), &[1.0, 2.0]);
        assert_eq!(cov, DMatrix::identity(2, 2));
    }

    #[test]
    fn gaussian_mean_cov_nonlinear() {
        let kernel = Kernel::nonlinear_gaussian(1, 0, &["s1^2"], &[vec!["0.5"]]).unwrap();
        let (mean, cov) = gaussian_mean_cov(&kernel, &[0.5], None).unwrap();
        assert_relative_eq!(mean[0], 0.25);
        assert_relative_eq!(cov[(0, 0)], 0.25);
    }

    #[test]
    fn gaussian_mean_cov_rejects_user_density() {
        let kernel = Kernel::user_density(1, 0, "1").unwrap();
        assert!(matches!(
            gaussian_mean_cov(&kernel, &[0.0], None),
            Err(Error::UnsupportedVariant(_))
        ));
    }

    #[test]
    fn density_integrates_to_one() {
        // Trapezoid quadrature over mean +/- 8 sigma.
        let kernel = Kernel::LinearGaussian {
            a: DMatrix::from_row_slice(1, 1, &[0.7]),
            b: DVector::from_column_slice(&[0.3]),
            sigma: DMatrix::from_row_slice(1, 1, &[0.25]),
            input: None,
        };
        let s = [0.4];
        let (mean, cov) = gaussian_mean_cov(&kernel, &s, None).unwrap();
        let sd = cov[(0, 0)].sqrt();
        let (lo, hi) = (mean[0] - 8.0 * sd, mean[0] + 8.0 * sd);
        let steps = 4000;
        let h = (hi - lo) / steps as f64;
        let mut mass = 0.0;
        for i in 0..=steps {
            let x = lo + i as f64 * h;
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            mass += w * eval_density(&kernel, &[x], &s, None).unwrap();
        }
        mass *= h;
        assert!((mass - 1.0).abs() < 1e-6, "mass = {mass}");
    }

    #[test]
    fn controlled_mean_shift() {
        let kernel = Kernel::LinearGaussian {
            a: DMatrix::from_row_slice(1, 1, &[1.0]),
            b: DVector::from_column_slice(&[0.0]),
            sigma: DMatrix::from_row_slice(1, 1, &[1.0]),
            input: Some(DMatrix::from_row_slice(1, 1, &[2.0])),
        };
        let (mean, _) = gaussian_mean_cov(&kernel, &[1.0], Some(&[0.5])).unwrap();
        assert_relative_eq!(mean[0], 2.0);
    }
}
