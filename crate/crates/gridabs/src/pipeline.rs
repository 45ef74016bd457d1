//! End-to-end run pipeline: Lipschitz estimation, cardinality preview,
//! partitioning, abstraction, dynamic programming, labeling, exports, and
//! per-initial-state queries, reported as a serializable run summary.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::abstraction::{
    assign_labels, build_mc, build_mdp, transition_row, AbstractModel, MarginalizationMode,
    QuadratureConfig,
};
use crate::config::{AssumptionMode, ExportKind, GriddingMode, ProblemKind, ProblemSpec};
use crate::error::{Error, Result};
use crate::export::{
    write_mrmc, write_prism_explicit, write_prism_module, write_results, ExportBundle,
};
use crate::gridding::{
    adaptive_refine, counts_for_delta, delta_for_error, maxmin_error_bounds, uniform_error_bound,
    uniform_partition, AdaptiveMode, CertMode, ErrorCertificate, Partition,
};
use crate::lipschitz::{
    global_input_lipschitz, global_state_lipschitz, LipschitzEstimate, SamplingConfig,
};
use crate::model::{validate_model, Model, Rect};
use crate::verification::{
    query_initial, reach_avoid_dp_mc, reach_avoid_dp_mdp, safety_dp_mc, safety_dp_mdp, Objective,
    Policy, ValueFunction,
};

/// Default cap on abstract state cells when the spec does not set one.
pub const DEFAULT_MAX_CELLS: usize = 50_000;

/// One initial-state query in the run report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryReport {
    pub s0: Vec<f64>,
    pub probability: f64,
    /// Cell index as a string, or `"phi"` for points outside the domain.
    pub state: String,
    pub labels: Vec<String>,
}

/// Summary of a completed run, also persisted as `report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub problem: ProblemKind,
    pub horizon: i64,
    pub requested_error: f64,
    pub achieved_error: f64,
    pub certificate_mode: CertMode,
    pub state_cells: usize,
    pub input_cells: usize,
    pub lipschitz_state: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz_input: Option<f64>,
    pub timings_ms: BTreeMap<String, u128>,
    pub outputs: Vec<String>,
    pub queries: Vec<QueryReport>,
    pub warnings: Vec<String>,
}

/// Cardinality and running-time preview for a spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EstimateReport {
    pub state_counts_per_dim: Vec<usize>,
    pub state_cells: usize,
    pub input_counts_per_dim: Vec<usize>,
    pub input_cells: usize,
    pub lipschitz_state: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz_input: Option<f64>,
    /// Total transition rows the abstraction would build.
    pub total_rows: usize,
    /// Extrapolated build time from a calibration sample, if one was run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimated_build_seconds: Option<f64>,
}

fn horizon_usize(spec: &ProblemSpec) -> usize {
    spec.horizon.max(0) as usize
}

fn rect_of(bounds: &[[f64; 2]]) -> Result<Rect> {
    Rect::new(&bounds.iter().map(|b| (b[0], b[1])).collect::<Vec<_>>())
}

/// Indices of cells whose representative lies inside `region`.
fn cells_in(partition: &Partition, region: &Rect) -> BTreeSet<usize> {
    partition
        .cells()
        .iter()
        .enumerate()
        .filter(|(_, cell)| region.contains(cell.representative()))
        .map(|(i, _)| i)
        .collect()
}

struct LipschitzPair {
    state: LipschitzEstimate,
    input: Option<LipschitzEstimate>,
}

fn estimate_lipschitz(model: &Model, cfg: &SamplingConfig) -> Result<LipschitzPair> {
    let input_space = model.input_space.as_ref();
    let state = global_state_lipschitz(&model.kernel, &model.state_space, input_space, cfg)?;
    let input = match input_space {
        Some(uspace) => Some(global_input_lipschitz(
            &model.kernel,
            &model.state_space,
            uspace,
            cfg,
        )?),
        None => None,
    };
    Ok(LipschitzPair { state, input })
}

/// Uniform grid sizes from the error-budget formulas.
fn uniform_counts(
    spec: &ProblemSpec,
    model: &Model,
    lip: &LipschitzPair,
) -> (Vec<usize>, Vec<usize>) {
    let n = horizon_usize(spec);
    let (delta_s, delta_u) = delta_for_error(
        spec.error_budget,
        n,
        lip.state.value,
        model.state_space.volume(),
        lip.input.as_ref().map(|l| l.value),
        model.input_space.as_ref().map(Rect::volume),
    );
    let state_counts = counts_for_delta(&model.state_space, delta_s);
    let input_counts = match (&model.input_space, delta_u) {
        (Some(uspace), Some(delta_u)) => counts_for_delta(uspace, delta_u),
        _ => Vec::new(),
    };
    (state_counts, input_counts)
}

fn capacity_check(counts: &[usize], cap: usize, force: bool) -> Result<usize> {
    let total: usize = counts.iter().product();
    if total > cap && !force {
        return Err(Error::Capacity {
            requested: total,
            cap,
        });
    }
    Ok(total)
}

struct Grids {
    partition: Partition,
    input_partition: Option<Partition>,
    certificate: ErrorCertificate,
}

/// Build state (and input) partitions plus the error certificate promised by
/// the selected gridding/assumption combination.
fn build_grids(
    spec: &ProblemSpec,
    model: &Model,
    lip: &LipschitzPair,
    quad: &QuadratureConfig,
    force: bool,
    warnings: &mut Vec<String>,
) -> Result<Grids> {
    let n = horizon_usize(spec);
    let eps = spec.error_budget;
    let max_cells = spec.max_cells.unwrap_or(DEFAULT_MAX_CELLS);
    let lip_cfg = SamplingConfig::default();
    let input_space = model.input_space.as_ref();

    let input_partition = |counts: &[usize]| -> Result<Option<Partition>> {
        match input_space {
            Some(uspace) => {
                let counts = if counts.is_empty() { vec![1; uspace.dim()] } else { counts.to_vec() };
                Ok(Some(uniform_partition(uspace, &counts, usize::MAX)?))
            }
            None => Ok(None),
        }
    };

    match spec.gridding {
        GriddingMode::Uniform => {
            let (state_counts, input_counts) = uniform_counts(spec, model, lip);
            capacity_check(&state_counts, max_cells, force)?;
            let mut state_counts = state_counts;
            let mut rounds = 0;
            loop {
                let partition = uniform_partition(&model.state_space, &state_counts, usize::MAX)?;
                let inputs = input_partition(&input_counts)?;
                let certificate = match spec.assumption {
                    AssumptionMode::Integral => {
                        let delta_s = partition.max_diameter();
                        let controlled = lip.input.as_ref().zip(inputs.as_ref()).map(|(l, ip)| {
                            (l.value, ip.max_diameter())
                        });
                        let bound = uniform_error_bound(
                            n,
                            lip.state.value,
                            delta_s,
                            model.state_space.volume(),
                            controlled,
                        );
                        ErrorCertificate::from_per_cell(
                            CertMode::UniformGlobal,
                            vec![bound; partition.cells().len()],
                            n,
                        )
                    }
                    AssumptionMode::Sample | AssumptionMode::MaxMin => maxmin_error_bounds(
                        &model.kernel,
                        &partition,
                        input_space,
                        n,
                        0,
                        quad,
                    )?,
                };
                if certificate.global <= eps {
                    return Ok(Grids {
                        partition,
                        input_partition: inputs,
                        certificate,
                    });
                }
                // The max-min certificate is not controlled by the Lipschitz
                // sizing formula; bisect until it meets the budget.
                rounds += 1;
                if rounds > 6 {
                    return Err(Error::BudgetExceeded {
                        max_cells,
                        best_error: certificate.global,
                    });
                }
                for c in state_counts.iter_mut() {
                    *c *= 2;
                }
                capacity_check(&state_counts, max_cells, force)?;
                warnings.push(format!(
                    "certificate {:.6} exceeded the budget; refined the state grid to {:?}",
                    certificate.global, state_counts
                ));
            }
        }
        GriddingMode::AdaptiveLocalMatrix | GriddingMode::AdaptiveLocalVector => {
            let mode = match spec.gridding {
                GriddingMode::AdaptiveLocalMatrix => AdaptiveMode::LocalMatrix,
                _ => AdaptiveMode::LocalVector,
            };
            // For controlled models half the budget is spent on the input
            // grid through the uniform formula; the state refinement gets
            // the other half.
            let (state_eps, input_counts, input_term) = match lip.input.as_ref() {
                Some(l) => {
                    let uspace = input_space.expect("controlled model has an input space");
                    let delta_u = if l.value == 0.0 {
                        f64::INFINITY
                    } else {
                        eps / (4.0 * n as f64 * l.value * model.state_space.volume())
                    };
                    let counts = counts_for_delta(uspace, delta_u);
                    (eps / 2.0, counts, 0.0)
                }
                None => (eps, Vec::new(), 0.0),
            };
            let refinement = adaptive_refine(
                &model.kernel,
                &model.state_space,
                input_space,
                n,
                state_eps,
                mode,
                max_cells,
                &lip_cfg,
            )?;
            let (partition, mut certificate) = refinement.into_result(max_cells)?;
            let inputs = input_partition(&input_counts)?;
            if let (Some(l), Some(ip)) = (lip.input.as_ref(), inputs.as_ref()) {
                let term = 2.0
                    * n as f64
                    * l.value
                    * ip.max_diameter()
                    * model.state_space.volume()
                    + input_term;
                for e in certificate.per_cell.iter_mut() {
                    *e += term;
                }
                certificate.global += term;
            }
            Ok(Grids {
                partition,
                input_partition: inputs,
                certificate,
            })
        }
    }
}

fn marginalization_of(assumption: AssumptionMode) -> MarginalizationMode {
    match assumption {
        AssumptionMode::Sample => MarginalizationMode::Sample,
        AssumptionMode::Integral | AssumptionMode::MaxMin => MarginalizationMode::Integral,
    }
}

struct DpOutput {
    values: Option<ValueFunction>,
    policy: Option<Policy>,
}

fn run_dp(spec: &ProblemSpec, abs: &AbstractModel) -> Result<DpOutput> {
    let n = spec.horizon;
    let objective = spec.objective.unwrap_or(Objective::Max);
    match spec.problem {
        ProblemKind::FormulaFree => Ok(DpOutput {
            values: None,
            policy: None,
        }),
        ProblemKind::Safety => {
            let safe_rect = rect_of(spec.safe_set.as_ref().expect("validated"))?;
            let safe = cells_in(&abs.partition, &safe_rect);
            if abs.is_mdp() {
                let (values, policy) = safety_dp_mdp(abs, &safe, n, objective)?;
                Ok(DpOutput {
                    values: Some(values),
                    policy: Some(policy),
                })
            } else {
                Ok(DpOutput {
                    values: Some(safety_dp_mc(abs, &safe, n)?),
                    policy: None,
                })
            }
        }
        ProblemKind::ReachAvoid => {
            let phi_rect = rect_of(spec.safe_set.as_ref().expect("validated"))?;
            let psi_rect = rect_of(spec.target_set.as_ref().expect("validated"))?;
            let phi = cells_in(&abs.partition, &phi_rect);
            let psi = cells_in(&abs.partition, &psi_rect);
            if abs.is_mdp() {
                let (values, policy) = reach_avoid_dp_mdp(abs, &phi, &psi, n, objective)?;
                Ok(DpOutput {
                    values: Some(values),
                    policy: Some(policy),
                })
            } else {
                Ok(DpOutput {
                    values: Some(reach_avoid_dp_mc(abs, &phi, &psi, n)?),
                    policy: None,
                })
            }
        }
    }
}

fn emit_exports(
    spec: &ProblemSpec,
    abs: &AbstractModel,
    dp: &DpOutput,
    out_dir: &Path,
    warnings: &mut Vec<String>,
) -> Result<Vec<String>> {
    let mut outputs = Vec::new();
    let write = |bundle: &ExportBundle, outputs: &mut Vec<String>| -> Result<()> {
        for path in bundle.write_to(out_dir)? {
            outputs.push(path.display().to_string());
        }
        Ok(())
    };
    let results_bundle = dp.values.as_ref().map(|values| {
        write_results(
            values,
            dp.policy
                .as_ref()
                .zip(abs.input_partition.as_ref())
                .map(|(p, ip)| (p, ip)),
            &abs.partition,
        )
    });
    for kind in &spec.exports {
        match kind {
            ExportKind::PrismExplicit => write(&write_prism_explicit(abs), &mut outputs)?,
            ExportKind::PrismModule => write(&write_prism_module(abs), &mut outputs)?,
            ExportKind::Mrmc => match write_mrmc(abs) {
                Ok(bundle) => write(&bundle, &mut outputs)?,
                Err(e) => warnings.push(format!("mrmc export skipped: {e}")),
            },
            ExportKind::Csv | ExportKind::Svg => {
                let Some(bundle) = results_bundle.as_ref() else {
                    warnings.push(format!(
                        "{:?} export skipped: formula-free runs have no value function",
                        kind
                    ));
                    continue;
                };
                let want_svg = matches!(kind, ExportKind::Svg);
                for file in &bundle.files {
                    let is_svg = file.path.ends_with(".svg");
                    if is_svg == want_svg {
                        let path = out_dir.join(&file.path);
                        std::fs::write(&path, &file.content)?;
                        outputs.push(path.display().to_string());
                    }
                }
                if want_svg
                    && abs.partition.dim() > 2
                    && !bundle.files.iter().any(|f| f.path.ends_with(".svg"))
                {
                    warnings.push("svg export skipped: state space has more than 2 dimensions".into());
                }
            }
        }
    }
    outputs.sort();
    outputs.dedup();
    Ok(outputs)
}

/// Execute a validated spec end to end, writing artifacts into `out_dir`.
pub fn run(spec: &ProblemSpec, out_dir: &Path, force: bool) -> Result<RunReport> {
    spec.validate()?;
    let model = spec.to_model()?;
    let validation = validate_model(&model);
    if !validation.is_valid() {
        return Err(Error::Config(validation.violations));
    }

    let mut warnings = Vec::new();
    let mut timings = BTreeMap::new();
    let quad = QuadratureConfig {
        order: spec.quadrature_order.unwrap_or(5),
    };
    let lip_cfg = SamplingConfig::default();

    let t = Instant::now();
    let lip = estimate_lipschitz(&model, &lip_cfg)?;
    timings.insert("lipschitz".to_string(), t.elapsed().as_millis());

    let t = Instant::now();
    let grids = build_grids(spec, &model, &lip, &quad, force, &mut warnings)?;
    timings.insert("gridding".to_string(), t.elapsed().as_millis());

    let t = Instant::now();
    let mode = marginalization_of(spec.assumption);
    let abs = if model.is_controlled() {
        build_mdp(
            &model,
            &grids.partition,
            grids
                .input_partition
                .as_ref()
                .expect("controlled model has an input partition"),
            mode,
            grids.certificate,
            &quad,
        )?
    } else {
        build_mc(&model, &grids.partition, mode, grids.certificate, &quad)?
    };
    let abs = assign_labels(abs, &spec.labels)?;
    warnings.extend(abs.warnings.iter().cloned());
    timings.insert("abstraction".to_string(), t.elapsed().as_millis());

    let t = Instant::now();
    let dp = run_dp(spec, &abs)?;
    timings.insert("verification".to_string(), t.elapsed().as_millis());

    let t = Instant::now();
    let mut outputs = emit_exports(spec, &abs, &dp, out_dir, &mut warnings)?;
    timings.insert("export".to_string(), t.elapsed().as_millis());

    let queries = match dp.values.as_ref() {
        Some(values) => spec
            .initial_states
            .iter()
            .map(|s0| {
                let hit = query_initial(values, &abs.partition, &abs.labels, s0);
                QueryReport {
                    s0: s0.clone(),
                    probability: hit.probability,
                    state: hit.state.map_or_else(|| "phi".to_string(), |i| i.to_string()),
                    labels: hit.labels,
                }
            })
            .collect(),
        None => Vec::new(),
    };

    let mut report = RunReport {
        problem: spec.problem,
        horizon: spec.horizon,
        requested_error: spec.error_budget,
        achieved_error: abs.certificate.global,
        certificate_mode: abs.certificate.mode,
        state_cells: abs.partition.cells().len(),
        input_cells: abs
            .input_partition
            .as_ref()
            .map_or(0, |p| p.cells().len()),
        lipschitz_state: lip.state.value,
        lipschitz_input: lip.input.as_ref().map(|l| l.value),
        timings_ms: timings,
        outputs: Vec::new(),
        queries,
        warnings,
    };
    std::fs::create_dir_all(out_dir)?;
    let report_path = out_dir.join("report.json");
    outputs.push(report_path.display().to_string());
    outputs.sort();
    outputs.dedup();
    report.outputs = outputs;
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(report)
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Error {
        Error::Other(format!("serialization failure: {e}"))
    }
}

/// Predict grid sizes and build effort without running the abstraction.
pub fn estimate(spec: &ProblemSpec) -> Result<EstimateReport> {
    spec.validate()?;
    let model = spec.to_model()?;
    let validation = validate_model(&model);
    if !validation.is_valid() {
        return Err(Error::Config(validation.violations));
    }
    let lip_cfg = SamplingConfig::default();
    let lip = estimate_lipschitz(&model, &lip_cfg)?;
    let (state_counts, input_counts) = uniform_counts(spec, &model, &lip);
    let state_cells: usize = state_counts.iter().product();
    let input_cells: usize = if input_counts.is_empty() {
        0
    } else {
        input_counts.iter().product()
    };
    let total_rows = state_cells * input_cells.max(1);

    // Calibrate from up to 100 real transition rows when that is cheap.
    let estimated_build_seconds = if state_cells <= 2_000_000 {
        let partition = uniform_partition(&model.state_space, &state_counts, usize::MAX)?;
        let quad = QuadratureConfig {
            order: spec.quadrature_order.unwrap_or(5),
        };
        let mode = marginalization_of(spec.assumption);
        let u = model.input_space.as_ref().map(Rect::center);
        let sample = partition.cells().len().min(100);
        let t = Instant::now();
        for cell in partition.cells().iter().take(sample) {
            transition_row(
                &model.kernel,
                cell.representative(),
                u.as_deref(),
                &partition,
                mode,
                &quad,
            )?;
        }
        let per_row = t.elapsed().as_secs_f64() / sample.max(1) as f64;
        Some(per_row * total_rows as f64)
    } else {
        None
    };

    Ok(EstimateReport {
        state_counts_per_dim: state_counts,
        state_cells,
        input_counts_per_dim: input_counts,
        input_cells,
        lipschitz_state: lip.state.value,
        lipschitz_input: lip.input.as_ref().map(|l| l.value),
        total_rows,
        estimated_build_seconds,
    })
}

/// Answer a query against a completed run directory using its CSV/label
/// artifacts (no recomputation).
pub fn query_run(run_dir: &Path, s0: &[f64]) -> Result<QueryReport> {
    let csv = std::fs::read_to_string(run_dir.join("values.csv"))?;
    let mut lines = csv.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Other("values.csv is empty".into()))?;
    let cols = header.split(',').count();
    // Header is state, n lowers, n uppers, n reps, value.
    let n = (cols - 2) / 3;
    if s0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "query point has {} coordinates, run has {n}",
            s0.len()
        )));
    }
    let mut hit: Option<(usize, f64)> = None;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        let state: usize = fields[0]
            .parse()
            .map_err(|_| Error::Other(format!("bad state id in values.csv: {line}")))?;
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|_| Error::Other(format!("bad number in values.csv: {line}")))
        };
        let mut inside = true;
        for d in 0..n {
            let lower = num(1 + d)?;
            let upper = num(1 + n + d)?;
            if s0[d] < lower || s0[d] > upper {
                inside = false;
                break;
            }
        }
        if inside {
            hit = Some((state, num(1 + 3 * n)?));
            break;
        }
    }
    let labels = match &hit {
        Some((state, _)) => labels_from_run(run_dir, *state)?,
        None => Vec::new(),
    };
    Ok(match hit {
        Some((state, value)) => QueryReport {
            s0: s0.to_vec(),
            probability: value,
            state: state.to_string(),
            labels,
        },
        None => QueryReport {
            s0: s0.to_vec(),
            probability: 0.0,
            state: "phi".to_string(),
            labels: Vec::new(),
        },
    })
}

/// Labels of a state from `model.lab`, when that artifact exists.
fn labels_from_run(run_dir: &Path, state: usize) -> Result<Vec<String>> {
    let path = run_dir.join("model.lab");
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let decl = lines.next().unwrap_or_default();
    let mut names: BTreeMap<usize, String> = BTreeMap::new();
    for token in decl.split_whitespace() {
        if let Some((id, name)) = token.split_once('=') {
            if let Ok(id) = id.parse::<usize>() {
                names.insert(id, name.trim_matches('"').to_string());
            }
        }
    }
    for line in lines {
        if let Some((s, ids)) = line.split_once(':') {
            if s.trim().parse::<usize>() == Ok(state) {
                let mut labels: Vec<String> = ids
                    .split_whitespace()
                    .filter_map(|id| id.parse::<usize>().ok())
                    .filter_map(|id| names.get(&id).cloned())
                    .filter(|name| name != "init" && name != "phi")
                    .collect();
                labels.sort();
                return Ok(labels);
            }
        }
    }
    Ok(Vec::new())
}
