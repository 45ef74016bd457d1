//! Partition construction: uniform grids, error-driven adaptive bisection,
//! and the error certificates attached to each candidate partition.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abstraction::{cell_masses, MarginalizationMode, QuadratureConfig};
use crate::error::{Error, Result};
use crate::lipschitz::{
    local_lipschitz_matrix, local_lipschitz_vector, LocalLipschitzTable, SamplingConfig,
};
use crate::model::{Kernel, Rect};

/// One partition cell: its box, representative point and diagonal length.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    bounds: Rect,
    representative: Vec<f64>,
}

impl Cell {
    /// Representative at the cell center (minimizes worst-case distance).
    pub fn centered(bounds: Rect) -> Cell {
        let representative = bounds.center();
        Cell {
            bounds,
            representative,
        }
    }

    pub fn bounds(&self) -> &Rect {
        &self.bounds
    }

    pub fn representative(&self) -> &[f64] {
        &self.representative
    }

    pub fn diameter(&self) -> f64 {
        self.bounds.diameter()
    }

    pub fn volume(&self) -> f64 {
        self.bounds.volume()
    }
}

/// A list of non-overlapping cells covering a box exactly.
#[derive(Debug, Clone)]
pub struct Partition {
    domain: Rect,
    cells: Vec<Cell>,
}

impl Partition {
    pub fn new(domain: Rect, cells: Vec<Cell>) -> Partition {
        Partition { domain, cells }
    }

    pub fn domain(&self) -> &Rect {
        &self.domain
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn max_diameter(&self) -> f64 {
        self.cells.iter().map(Cell::diameter).fold(0.0, f64::max)
    }

    /// Verify the cover invariant: volumes sum to the domain volume and cell
    /// interiors are pairwise disjoint.
    pub fn check_cover(&self, rel_tol: f64) -> Result<()> {
        let total: f64 = self.cells.iter().map(Cell::volume).sum();
        let domain_vol = self.domain.volume();
        if ((total - domain_vol) / domain_vol).abs() > rel_tol {
            return Err(Error::Other(format!(
                "cell volumes sum to {total}, domain volume is {domain_vol}"
            )));
        }
        let n = self.dim();
        for (i, a) in self.cells.iter().enumerate() {
            for b in &self.cells[i + 1..] {
                let overlaps = (0..n).all(|d| {
                    a.bounds.lower()[d] < b.bounds.upper()[d]
                        && b.bounds.lower()[d] < a.bounds.upper()[d]
                });
                if overlaps {
                    return Err(Error::Other(format!(
                        "cells {:?} and {:?} have overlapping interiors",
                        a.bounds, b.bounds
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Which error-bound scheme produced a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertMode {
    UniformGlobal,
    LocalMatrix,
    LocalVector,
    MaxMin,
}

/// A certified bound on the abstraction error over the horizon.
#[derive(Debug, Clone)]
pub struct ErrorCertificate {
    pub mode: CertMode,
    pub per_cell: Vec<f64>,
    pub global: f64,
    pub horizon: usize,
}

impl ErrorCertificate {
    pub fn from_per_cell(mode: CertMode, per_cell: Vec<f64>, horizon: usize) -> ErrorCertificate {
        let global = per_cell.iter().copied().fold(0.0, f64::max);
        ErrorCertificate {
            mode,
            per_cell,
            global,
            horizon,
        }
    }
}

/// Axis-aligned uniform grid with representatives at cell centers.
pub fn uniform_partition(domain: &Rect, cells_per_dim: &[usize], cap: usize) -> Result<Partition> {
    let n = domain.dim();
    if cells_per_dim.len() != n || cells_per_dim.iter().any(|&c| c == 0) {
        return Err(Error::DimensionMismatch(format!(
            "need {n} positive cell counts, got {cells_per_dim:?}"
        )));
    }
    let total: usize = cells_per_dim.iter().try_fold(1usize, |acc, &c| {
        acc.checked_mul(c).ok_or(Error::Capacity {
            requested: usize::MAX,
            cap,
        })
    })?;
    if total > cap {
        return Err(Error::Capacity {
            requested: total,
            cap,
        });
    }

    let mut cells = Vec::with_capacity(total);
    let mut idx = vec![0usize; n];
    loop {
        let bounds: Vec<(f64, f64)> = (0..n)
            .map(|d| {
                let w = domain.width(d) / cells_per_dim[d] as f64;
                let lo = domain.lower()[d] + idx[d] as f64 * w;
                // Snap the last cell edge to the domain edge.
                let hi = if idx[d] + 1 == cells_per_dim[d] {
                    domain.upper()[d]
                } else {
                    domain.lower()[d] + (idx[d] + 1) as f64 * w
                };
                (lo, hi)
            })
            .collect();
        cells.push(Cell::centered(Rect::new(&bounds)?));
        let mut d = 0;
        loop {
            if d == n {
                return Ok(Partition::new(domain.clone(), cells));
            }
            idx[d] += 1;
            if idx[d] < cells_per_dim[d] {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Bisect a cell along its longest edge (ties: lowest dimension index).
pub fn split_cell(cell: &Cell) -> (Cell, Cell) {
    let bounds = cell.bounds();
    let n = bounds.dim();
    let mut axis = 0;
    for d in 1..n {
        if bounds.width(d) > bounds.width(axis) {
            axis = d;
        }
    }
    let mid = 0.5 * (bounds.lower()[axis] + bounds.upper()[axis]);
    let mut lo_bounds = bounds.bounds();
    let mut hi_bounds = bounds.bounds();
    lo_bounds[axis].1 = mid;
    hi_bounds[axis].0 = mid;
    (
        Cell::centered(Rect::new(&lo_bounds).expect("child of a valid cell is valid")),
        Cell::centered(Rect::new(&hi_bounds).expect("child of a valid cell is valid")),
    )
}

/// Invert the uniform error formula: the cell diameter that meets `epsilon`.
///
/// Uncontrolled: `delta_s = eps / (N h_s L(S))`. Controlled: the budget is
/// split equally between state and input resolution against
/// `E = 2(h_s delta_s + h_u delta_u) L(S)`, giving
/// `delta_s = eps / (4 N h_s L(S))` and `delta_u = eps / (4 N h_u L(S))`.
/// A zero Lipschitz constant yields an infinite diameter (one cell suffices).
/// `vol_u` is accepted for interface symmetry but does not enter the formula;
/// the error bound scales with the state-space volume only.
pub fn delta_for_error(
    epsilon: f64,
    horizon: usize,
    h_s: f64,
    vol_s: f64,
    h_u: Option<f64>,
    _vol_u: Option<f64>,
) -> (f64, Option<f64>) {
    let n = horizon as f64;
    match h_u {
        None => {
            let delta_s = if h_s == 0.0 {
                f64::INFINITY
            } else {
                epsilon / (n * h_s * vol_s)
            };
            (delta_s, None)
        }
        Some(h_u) => {
            let delta_s = if h_s == 0.0 {
                f64::INFINITY
            } else {
                epsilon / (4.0 * n * h_s * vol_s)
            };
            let delta_u = if h_u == 0.0 {
                f64::INFINITY
            } else {
                epsilon / (4.0 * n * h_u * vol_s)
            };
            (delta_s, Some(delta_u))
        }
    }
}

/// The uniform-grid error bound `N h_s delta_s L(S)`, or
/// `N 2 (h_s delta_s + h_u delta_u) L(S)` for controlled models.
pub fn uniform_error_bound(
    horizon: usize,
    h_s: f64,
    delta_s: f64,
    vol_s: f64,
    controlled: Option<(f64, f64)>,
) -> f64 {
    let n = horizon as f64;
    let term = |h: f64, d: f64| if h == 0.0 { 0.0 } else { h * d };
    match controlled {
        None => n * term(h_s, delta_s) * vol_s,
        Some((h_u, delta_u)) => n * 2.0 * (term(h_s, delta_s) + term(h_u, delta_u)) * vol_s,
    }
}

/// Formula-dependent certificate `max_i gamma_i delta_i` with
/// `gamma_i = N sum_j h(i,j) L(A_j)`.
pub fn local_error_bounds(
    horizon: usize,
    table: &LocalLipschitzTable,
    partition: &Partition,
) -> Result<ErrorCertificate> {
    let cells = partition.cells();
    if table.num_sources() != cells.len() {
        return Err(Error::DimensionMismatch(format!(
            "table has {} sources, partition has {} cells",
            table.num_sources(),
            cells.len()
        )));
    }
    let n = horizon as f64;
    let (per_cell, mode) = match table {
        LocalLipschitzTable::Matrix(rows) => (
            rows.iter()
                .zip(cells)
                .map(|(row, cell)| {
                    let gamma: f64 = row
                        .iter()
                        .zip(cells)
                        .map(|(&h, dst)| h * dst.volume())
                        .sum::<f64>()
                        * n;
                    gamma * cell.diameter()
                })
                .collect(),
            CertMode::LocalMatrix,
        ),
        LocalLipschitzTable::PerSource(hs) => {
            let total_vol: f64 = cells.iter().map(Cell::volume).sum();
            (
                hs.iter()
                    .zip(cells)
                    .map(|(&h, cell)| n * h * total_vol * cell.diameter())
                    .collect(),
                CertMode::LocalVector,
            )
        }
    };
    Ok(ErrorCertificate::from_per_cell(mode, per_cell, horizon))
}

/// Continuity-free certificate from the per-cell spread of marginal masses:
/// `N sum_j (max_s T(A_j|s) - min_s T(A_j|s))` over sample points of each
/// source cell (vertices plus center, densified up to `samples_per_cell`).
pub fn maxmin_error_bounds(
    kernel: &Kernel,
    partition: &Partition,
    input_space: Option<&Rect>,
    horizon: usize,
    samples_per_cell: usize,
    quad: &QuadratureConfig,
) -> Result<ErrorCertificate> {
    let cells = partition.cells();
    let u_samples: Vec<Option<Vec<f64>>> = match input_space {
        Some(uspace) => {
            let mut pts = uspace.vertices();
            pts.push(uspace.center());
            pts.into_iter().map(Some).collect()
        }
        None => vec![None],
    };

    let per_cell: Vec<f64> = cells
        .par_iter()
        .map(|cell| {
            let samples = cell_samples(cell.bounds(), samples_per_cell);
            let mut worst = 0.0f64;
            for u in &u_samples {
                let mut spread_min: Vec<f64> = vec![f64::INFINITY; cells.len()];
                let mut spread_max: Vec<f64> = vec![f64::NEG_INFINITY; cells.len()];
                for s in &samples {
                    let row = cell_masses(
                        kernel,
                        s,
                        u.as_deref(),
                        partition,
                        MarginalizationMode::Integral,
                        quad,
                    )?;
                    for (j, &mass) in row.iter().enumerate() {
                        spread_min[j] = spread_min[j].min(mass);
                        spread_max[j] = spread_max[j].max(mass);
                    }
                }
                let spread: f64 = spread_max
                    .iter()
                    .zip(&spread_min)
                    .map(|(hi, lo)| hi - lo)
                    .sum();
                worst = worst.max(spread);
            }
            Ok(horizon as f64 * worst)
        })
        .collect::<Result<_>>()?;

    Ok(ErrorCertificate::from_per_cell(
        CertMode::MaxMin,
        per_cell,
        horizon,
    ))
}

/// Vertices plus center, densified with a lattice when more samples are asked.
fn cell_samples(bounds: &Rect, samples_per_cell: usize) -> Vec<Vec<f64>> {
    let mut samples = bounds.vertices();
    samples.push(bounds.center());
    if samples_per_cell > samples.len() {
        let n = bounds.dim();
        let k = (samples_per_cell as f64).powf(1.0 / n as f64).ceil() as usize;
        if k > 2 {
            samples.extend(bounds.lattice(k));
        }
    }
    samples
}

/// Which local table drives the adaptive loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdaptiveMode {
    LocalMatrix,
    LocalVector,
}

/// Result of adaptive refinement; `converged` is false when the cell budget
/// was reached before the certificate met the target.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub partition: Partition,
    pub certificate: ErrorCertificate,
    pub converged: bool,
    pub rounds: usize,
}

impl Refinement {
    /// Convert a budget-limited refinement into the budget-exceeded error.
    pub fn into_result(self, max_cells: usize) -> Result<(Partition, ErrorCertificate)> {
        if self.converged {
            Ok((self.partition, self.certificate))
        } else {
            Err(Error::BudgetExceeded {
                max_cells,
                best_error: self.certificate.global,
            })
        }
    }
}

/// Error-driven refinement: start from two cells per dimension, recompute the
/// local certificate each round, and bisect every cell whose error exceeds
/// the budget along its longest edge until the global error meets `epsilon`.
#[allow(clippy::too_many_arguments)]
pub fn adaptive_refine(
    kernel: &Kernel,
    domain: &Rect,
    input_space: Option<&Rect>,
    horizon: usize,
    epsilon: f64,
    mode: AdaptiveMode,
    max_cells: usize,
    lip_cfg: &SamplingConfig,
) -> Result<Refinement> {
    if epsilon <= 0.0 {
        return Err(Error::Other("adaptive refinement needs epsilon > 0".into()));
    }
    let mut partition = uniform_partition(domain, &vec![2; domain.dim()], max_cells.max(1 << domain.dim()))?;
    let mut rounds = 0usize;
    loop {
        rounds += 1;
        let table = match mode {
            AdaptiveMode::LocalMatrix => {
                local_lipschitz_matrix(kernel, &partition, input_space, lip_cfg)?
            }
            AdaptiveMode::LocalVector => {
                local_lipschitz_vector(kernel, &partition, input_space, lip_cfg)?
            }
        };
        let certificate = local_error_bounds(horizon, &table, &partition)?;
        if certificate.global <= epsilon {
            return Ok(Refinement {
                partition,
                certificate,
                converged: true,
                rounds,
            });
        }
        let over: Vec<usize> = certificate
            .per_cell
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > epsilon)
            .map(|(i, _)| i)
            .collect();
        if partition.cells().len() + over.len() > max_cells || rounds > 60 {
            return Ok(Refinement {
                partition,
                certificate,
                converged: false,
                rounds,
            });
        }
        let mut cells = Vec::with_capacity(partition.cells().len() + over.len());
        for (i, cell) in partition.cells().iter().enumerate() {
            if over.binary_search(&i).is_ok() {
                let (a, b) = split_cell(cell);
                cells.push(a);
                cells.push(b);
            } else {
                cells.push(cell.clone());
            }
        }
        partition = Partition::new(domain.clone(), cells);
    }
}

/// Predicted state/input cell counts for a uniform grid meeting the given
/// diameters; sides are `delta / sqrt(n)` so that cell diagonals equal delta.
pub fn estimate_cardinality(
    domain: &Rect,
    delta_s: f64,
    input_space: Option<&Rect>,
    delta_u: Option<f64>,
) -> (usize, usize) {
    let state: usize = counts_for_delta(domain, delta_s).iter().product();
    let input: usize = match (input_space, delta_u) {
        (Some(uspace), Some(delta_u)) => counts_for_delta(uspace, delta_u).iter().product(),
        (Some(_), None) => 1,
        (None, _) => 0,
    };
    (state, input)
}

/// Per-dimension cell counts for a target cell diagonal.
pub fn counts_for_delta(domain: &Rect, delta: f64) -> Vec<usize> {
    let n = domain.dim();
    if !delta.is_finite() {
        return vec![1; n];
    }
    let side = delta / (n as f64).sqrt();
    (0..n)
        .map(|d| ((domain.width(d) / side).ceil() as usize).max(1))
        .collect()
}
