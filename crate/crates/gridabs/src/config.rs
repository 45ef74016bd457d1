//! JSON problem-file schema: parsing, field-level validation, and
//! conversion into a [`Model`] plus run settings.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::abstraction::LabelDef;
use crate::error::{Error, Result};
use crate::model::{Kernel, Model, Rect};
use crate::verification::Objective;

/// Which verification problem to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    /// Abstraction only: build and export the finite model.
    FormulaFree,
    Safety,
    ReachAvoid,
}

/// Partitioning strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GriddingMode {
    #[default]
    Uniform,
    AdaptiveLocalMatrix,
    AdaptiveLocalVector,
}

/// Continuity assumption governing marginalization and certificates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AssumptionMode {
    #[default]
    Integral,
    Sample,
    MaxMin,
}

/// Requested output artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportKind {
    PrismExplicit,
    PrismModule,
    Mrmc,
    Csv,
    Svg,
}

/// Kernel description in the problem file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum KernelSpec {
    LinearGaussian {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        sigma: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g: Option<Vec<Vec<f64>>>,
    },
    NonlinearGaussian {
        drift: Vec<String>,
        variance: Vec<Vec<String>>,
    },
    UserDensity {
        density: String,
    },
}

/// The full problem file, mirroring the tool's configuration surface.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ProblemSpec {
    pub problem: ProblemKind,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub controlled: bool,
    #[serde(default)]
    pub gridding: GriddingMode,
    #[serde(default)]
    pub assumption: AssumptionMode,
    pub horizon: i64,
    pub error_budget: f64,
    pub domain: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub safe_set: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_set: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_set: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub labels: Vec<LabelDef>,
    #[serde(default)]
    pub exports: Vec<ExportKind>,
    #[serde(default)]
    pub initial_states: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<Objective>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_cells: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn rect_from(field: &str, bounds: &[[f64; 2]], errors: &mut Vec<String>) -> Option<Rect> {
    let pairs: Vec<(f64, f64)> = bounds.iter().map(|b| (b[0], b[1])).collect();
    match Rect::new(&pairs) {
        Ok(r) => Some(r),
        Err(e) => {
            errors.push(format!("{field}: {e}"));
            None
        }
    }
}

fn check_inside(field: &str, inner: &Rect, domain: &Rect, errors: &mut Vec<String>) {
    if inner.dim() != domain.dim() {
        errors.push(format!(
            "{field}: has {} dimensions, domain has {}",
            inner.dim(),
            domain.dim()
        ));
        return;
    }
    for d in 0..domain.dim() {
        if inner.lower()[d] < domain.lower()[d] - 1e-12 || inner.upper()[d] > domain.upper()[d] + 1e-12 {
            errors.push(format!("{field}: not contained in the domain"));
            return;
        }
    }
}

impl ProblemSpec {
    /// Cross-field validation; all problems are listed at once.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.horizon < 1 {
            errors.push(format!("horizon: must be at least 1, got {}", self.horizon));
        }
        if !(self.error_budget > 0.0) {
            errors.push(format!(
                "errorBudget: must be positive, got {}",
                self.error_budget
            ));
        }
        if self.domain.is_empty() {
            errors.push("domain: must list at least one dimension".into());
        }
        let domain = rect_from("domain", &self.domain, &mut errors);

        match self.problem {
            ProblemKind::Safety => {
                if self.safe_set.is_none() {
                    errors.push("safeSet: required for a safety problem".into());
                }
            }
            ProblemKind::ReachAvoid => {
                if self.safe_set.is_none() {
                    errors.push("safeSet: required for a reach-avoid problem".into());
                }
                if self.target_set.is_none() {
                    errors.push("targetSet: required for a reach-avoid problem".into());
                }
            }
            ProblemKind::FormulaFree => {}
        }
        for (field, set) in [("safeSet", &self.safe_set), ("targetSet", &self.target_set)] {
            if let Some(bounds) = set {
                if let (Some(r), Some(d)) = (rect_from(field, bounds, &mut errors), domain.as_ref())
                {
                    check_inside(field, &r, d, &mut errors);
                }
            }
        }
        if self.controlled && self.input_set.is_none() {
            errors.push("inputSet: required for a controlled model".into());
        }
        if !self.controlled && self.input_set.is_some() {
            errors.push("inputSet: given but `controlled` is false".into());
        }
        if let Some(bounds) = &self.input_set {
            rect_from("inputSet", bounds, &mut errors);
        }
        if let Some(order) = self.quadrature_order {
            if order == 0 {
                errors.push("quadratureOrder: must be at least 1".into());
            }
        }
        if let KernelSpec::LinearGaussian { g, .. } = &self.kernel {
            if g.is_some() && !self.controlled {
                errors.push("kernel.g: input matrix given but `controlled` is false".into());
            }
        }
        let n = self.domain.len();
        for (i, s0) in self.initial_states.iter().enumerate() {
            if s0.len() != n {
                errors.push(format!(
                    "initialStates[{i}]: has {} coordinates, domain has {n}",
                    s0.len()
                ));
            }
        }
        for (i, label) in self.labels.iter().enumerate() {
            if label.a.len() != label.b.len() || label.a.iter().any(|row| row.len() != n) {
                errors.push(format!(
                    "labels[{i}]: A must be k x {n} with k matching B"
                ));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    /// Build the continuous model described by the spec.
    pub fn to_model(&self) -> Result<Model> {
        let n = self.domain.len();
        let m = self.input_set.as_ref().map_or(0, Vec::len);
        let state_space = Rect::new(
            &self.domain.iter().map(|b| (b[0], b[1])).collect::<Vec<_>>(),
        )?;
        let input_space = match &self.input_set {
            Some(bounds) => Some(Rect::new(
                &bounds.iter().map(|b| (b[0], b[1])).collect::<Vec<_>>(),
            )?),
            None => None,
        };
        let kernel = match &self.kernel {
            KernelSpec::LinearGaussian { a, b, sigma, g } => {
                let rows = a.len();
                let cols = a.first().map_or(0, Vec::len);
                if rows != n || cols != n {
                    return Err(Error::Config(vec![format!(
                        "kernel.a: is {rows}x{cols}, expected {n}x{n}"
                    )]));
                }
                Kernel::LinearGaussian {
                    a: DMatrix::from_row_slice(n, n, &a.concat()),
                    b: DVector::from_column_slice(b),
                    sigma: DMatrix::from_row_slice(
                        sigma.len(),
                        sigma.first().map_or(0, Vec::len),
                        &sigma.concat(),
                    ),
                    input: match g {
                        Some(g) => {
                            let gr = g.len();
                            let gc = g.first().map_or(0, Vec::len);
                            Some(DMatrix::from_row_slice(gr, gc, &g.concat()))
                        }
                        None => None,
                    },
                }
            }
            KernelSpec::NonlinearGaussian { drift, variance } => {
                let drift_refs: Vec<&str> = drift.iter().map(String::as_str).collect();
                let variance_refs: Vec<Vec<&str>> = variance
                    .iter()
                    .map(|row| row.iter().map(String::as_str).collect())
                    .collect();
                Kernel::nonlinear_gaussian(n, m, &drift_refs, &variance_refs)?
            }
            KernelSpec::UserDensity { density } => Kernel::user_density(n, m, density)?,
        };
        Ok(Model::new(state_space, input_space, kernel))
    }
}

/// Parse and validate a JSON problem file.
pub fn parse_config(text: &str) -> Result<ProblemSpec> {
    let spec: ProblemSpec = serde_json::from_str(text)
        .map_err(|e| Error::Config(vec![format!("json: {e}")]))?;
    spec.validate()?;
    Ok(spec)
}
