//! Marginalization of the kernel over partition cells: builds the finite
//! MC/MDP with an absorbing state for the truncated region, and attaches
//! half-plane labels.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::gridding::{ErrorCertificate, Partition};
use crate::model::{Kernel, Model, NextDist, Rect};

/// How cell transition masses are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarginalizationMode {
    /// `T(z, z') = integral of the density over the destination cell`.
    Integral,
    /// `T(z, z') = t(z'|z) * volume(destination)` (midpoint rule).
    Sample,
}

/// Quadrature settings for the integral marginalization path.
#[derive(Debug, Clone)]
pub struct QuadratureConfig {
    /// Gauss-Legendre order per dimension per destination cell.
    pub order: usize,
}

impl Default for QuadratureConfig {
    fn default() -> QuadratureConfig {
        QuadratureConfig { order: 5 }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre polynomial.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order.max(1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-based initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Legendre polynomial `P_n(x)` and derivative by recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// Marginal masses `T(A_j | s, u)` for all destination cells (no phi entry).
pub fn cell_masses(
    kernel: &Kernel,
    source: &[f64],
    u: Option<&[f64]>,
    partition: &Partition,
    mode: MarginalizationMode,
    quad: &QuadratureConfig,
) -> Result<Vec<f64>> {
    let dist = kernel.next_dist(source, u)?;
    let cells = partition.cells();
    match mode {
        MarginalizationMode::Sample => cells
            .iter()
            .map(|cell| Ok(dist.pdf(cell.representative())? * cell.volume()))
            .collect(),
        MarginalizationMode::Integral => {
            if let Some((mean, _, Some(diag_std))) = dist.gaussian_parts() {
                // Closed-form CDF products for diagonal covariance.
                return Ok(cells
                    .iter()
                    .map(|cell| {
                        let b = cell.bounds();
                        (0..b.dim())
                            .map(|d| {
                                let mu = mean[d];
                                let sd = diag_std[d];
                                normal_cdf((b.upper()[d] - mu) / sd)
                                    - normal_cdf((b.lower()[d] - mu) / sd)
                            })
                            .product()
                    })
                    .collect());
            }
            let (nodes, weights) = gauss_legendre(quad.order);
            cells
                .iter()
                .map(|cell| {
                    let mass = quadrature_over_cell(&dist, cell.bounds(), &nodes, &weights)?;
                    if !(-1e-9..=1.0 + 1e-9).contains(&mass) {
                        return Err(Error::IntegrationAccuracy(format!(
                            "cell mass {mass} outside [0,1] at source {source:?}"
                        )));
                    }
                    Ok(mass.clamp(0.0, 1.0))
                })
                .collect()
        }
    }
}

/// Tensor-product Gauss-Legendre integral of the density over a box.
fn quadrature_over_cell(
    dist: &NextDist<'_>,
    bounds: &Rect,
    nodes: &[f64],
    weights: &[f64],
) -> Result<f64> {
    let n = bounds.dim();
    let q = nodes.len();
    let scale: f64 = (0..n).map(|d| bounds.width(d) / 2.0).product();
    let mut idx = vec![0usize; n];
    let mut point = vec![0.0; n];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for d in 0..n {
            let mid = 0.5 * (bounds.lower()[d] + bounds.upper()[d]);
            point[d] = mid + 0.5 * bounds.width(d) * nodes[idx[d]];
            w *= weights[idx[d]];
        }
        total += w * dist.pdf(&point)?;
        let mut d = 0;
        loop {
            if d == n {
                return Ok(total * scale);
            }
            idx[d] += 1;
            if idx[d] < q {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// One transition row over the partition cells (the phi residual is handled
/// when the full model is assembled).
pub fn transition_row(
    kernel: &Kernel,
    source_rep: &[f64],
    u: Option<&[f64]>,
    partition: &Partition,
    mode: MarginalizationMode,
    quad: &QuadratureConfig,
) -> Result<Vec<f64>> {
    cell_masses(kernel, source_rep, u, partition, mode, quad)
}

/// Half-plane label definition: states with `A z <= B` get `symbol`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LabelDef {
    pub symbol: String,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

/// Transition structure of the abstract model.
#[derive(Debug, Clone)]
pub enum Transitions {
    /// Row-stochastic `(p+1) x (p+1)` matrix.
    Mc(Vec<Vec<f64>>),
    /// Per-input row-stochastic matrices, `q x (p+1) x (p+1)`.
    Mdp(Vec<Vec<Vec<f64>>>),
}

/// Finite MC/MDP abstraction: partition cells plus one absorbing state,
/// transition probabilities, labels and the attached error certificate.
#[derive(Debug, Clone)]
pub struct AbstractModel {
    pub partition: Partition,
    pub input_partition: Option<Partition>,
    pub transitions: Transitions,
    pub labels: BTreeMap<String, BTreeSet<usize>>,
    pub certificate: ErrorCertificate,
    pub mode: MarginalizationMode,
    pub warnings: Vec<String>,
}

impl AbstractModel {
    pub fn is_mdp(&self) -> bool {
        matches!(self.transitions, Transitions::Mdp(_))
    }

    /// Number of abstract states including the absorbing state.
    pub fn num_states(&self) -> usize {
        self.partition.cells().len() + 1
    }

    /// Index of the absorbing state (always last).
    pub fn absorbing_index(&self) -> usize {
        self.partition.cells().len()
    }

    pub fn num_inputs(&self) -> usize {
        match &self.transitions {
            Transitions::Mc(_) => 0,
            Transitions::Mdp(per_input) => per_input.len(),
        }
    }

    pub fn row(&self, input: usize, source: usize) -> &[f64] {
        match &self.transitions {
            Transitions::Mc(rows) => &rows[source],
            Transitions::Mdp(per_input) => &per_input[input][source],
        }
    }

    /// Labels attached to a state, sorted by symbol.
    pub fn labels_of(&self, state: usize) -> Vec<String> {
        self.labels
            .iter()
            .filter(|(_, states)| states.contains(&state))
            .map(|(sym, _)| sym.clone())
            .collect()
    }
}

/// Assemble one full row: cell masses plus the phi residual.
fn complete_row(
    kernel: &Kernel,
    rep: &[f64],
    u: Option<&[f64]>,
    partition: &Partition,
    mode: MarginalizationMode,
    quad: &QuadratureConfig,
) -> Result<(Vec<f64>, Option<String>)> {
    let mut row = cell_masses(kernel, rep, u, partition, mode, quad)?;
    let sum: f64 = row.iter().sum();
    let mut warning = None;
    if sum > 1.0 {
        if mode == MarginalizationMode::Sample {
            if sum > 1.0 + 0.01 {
                warning = Some(format!(
                    "sample-mode row from {rep:?} sums to {sum}; midpoint rule overshoot, row renormalized"
                ));
            }
            // Midpoint overshoot: renormalize so the model stays stochastic.
            for entry in row.iter_mut() {
                *entry /= sum;
            }
        } else if sum > 1.0 + 1e-9 {
            return Err(Error::IntegrationAccuracy(format!(
                "integral-mode row from {rep:?} sums to {sum}"
            )));
        } else {
            let scale = 1.0 / sum;
            for entry in row.iter_mut() {
                *entry *= scale;
            }
        }
    }
    let residual = (1.0 - row.iter().sum::<f64>()).max(0.0);
    row.push(residual);
    Ok((row, warning))
}

/// Algorithm: partition cells become MC states, rows are marginal masses,
/// leftover mass goes to the absorbing state.
pub fn build_mc(
    model: &Model,
    partition: &Partition,
    mode: MarginalizationMode,
    certificate: ErrorCertificate,
    quad: &QuadratureConfig,
) -> Result<AbstractModel> {
    if model.is_controlled() {
        return Err(Error::InvalidModel(
            "build_mc requires an uncontrolled model; use build_mdp".into(),
        ));
    }
    let p = partition.cells().len();
    let results: Vec<(Vec<f64>, Option<String>)> = partition
        .cells()
        .par_iter()
        .map(|cell| complete_row(&model.kernel, cell.representative(), None, partition, mode, quad))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(p + 1);
    let mut warnings = Vec::new();
    for (row, warning) in results {
        rows.push(row);
        warnings.extend(warning);
    }
    let mut phi_row = vec![0.0; p + 1];
    phi_row[p] = 1.0;
    rows.push(phi_row);
    Ok(AbstractModel {
        partition: partition.clone(),
        input_partition: None,
        transitions: Transitions::Mc(rows),
        labels: BTreeMap::new(),
        certificate,
        mode,
        warnings,
    })
}

/// MDP abstraction: one row-stochastic matrix per input representative.
pub fn build_mdp(
    model: &Model,
    state_partition: &Partition,
    input_partition: &Partition,
    mode: MarginalizationMode,
    certificate: ErrorCertificate,
    quad: &QuadratureConfig,
) -> Result<AbstractModel> {
    if !model.is_controlled() {
        return Err(Error::InvalidModel(
            "build_mdp requires a controlled model; use build_mc".into(),
        ));
    }
    let p = state_partition.cells().len();
    let per_input: Vec<Vec<(Vec<f64>, Option<String>)>> = input_partition
        .cells()
        .par_iter()
        .map(|input_cell| {
            state_partition
                .cells()
                .par_iter()
                .map(|cell| {
                    complete_row(
                        &model.kernel,
                        cell.representative(),
                        Some(input_cell.representative()),
                        state_partition,
                        mode,
                        quad,
                    )
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut warnings = Vec::new();
    let matrices: Vec<Vec<Vec<f64>>> = per_input
        .into_iter()
        .map(|rows| {
            let mut out = Vec::with_capacity(p + 1);
            for (row, warning) in rows {
                out.push(row);
                warnings.extend(warning);
            }
            let mut phi_row = vec![0.0; p + 1];
            phi_row[p] = 1.0;
            out.push(phi_row);
            out
        })
        .collect();

    Ok(AbstractModel {
        partition: state_partition.clone(),
        input_partition: Some(input_partition.clone()),
        transitions: Transitions::Mdp(matrices),
        labels: BTreeMap::new(),
        certificate,
        mode,
        warnings,
    })
}

/// Attach each label to the non-absorbing states whose representative
/// satisfies `A z <= B` componentwise.
pub fn assign_labels(mut model: AbstractModel, defs: &[LabelDef]) -> Result<AbstractModel> {
    let n = model.partition.dim();
    for def in defs {
        if def.a.len() != def.b.len() || def.a.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "label `{}`: A must be k x {n} with k matching B",
                def.symbol
            )));
        }
        let states: BTreeSet<usize> = model
            .partition
            .cells()
            .iter()
            .enumerate()
            .filter(|(_, cell)| {
                def.a.iter().zip(&def.b).all(|(row, &b)| {
                    let dot: f64 = row
                        .iter()
                        .zip(cell.representative())
                        .map(|(a, z)| a * z)
                        .sum();
                    dot <= b
                })
            })
            .map(|(i, _)| i)
            .collect();
        model.labels.insert(def.symbol.clone(), states);
    }
    Ok(model)
}

/// Index of the cell containing `s0`; boundary points belong to the cell with
/// the lower index; `None` means the absorbing state.
pub fn locate_state(partition: &Partition, s0: &[f64]) -> Option<usize> {
    partition
        .cells()
        .iter()
        .position(|cell| cell.bounds().contains(s0))
}
