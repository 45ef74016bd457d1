//! Finite-state abstraction of discrete-time Markov processes over
//! continuous spaces, with certified error bounds, bounded-horizon
//! probabilistic verification, and export to standard model-checker formats.

pub mod abstraction;
pub mod config;
pub mod error;
pub mod export;
pub mod expr;
pub mod gridding;
pub mod lipschitz;
pub mod model;
pub mod pipeline;
pub mod verification;

pub use abstraction::{
    assign_labels, build_mc, build_mdp, cell_masses, locate_state, transition_row, AbstractModel,
    LabelDef, MarginalizationMode, QuadratureConfig, Transitions,
};
pub use config::{
    parse_config, AssumptionMode, ExportKind, GriddingMode, KernelSpec, ProblemKind, ProblemSpec,
};
pub use error::{Error, Result};
pub use pipeline::{estimate, query_run, run, EstimateReport, QueryReport, RunReport};
pub use export::{
    heatmap_svg, read_prism_explicit, read_prism_module, write_mrmc, write_prism_explicit,
    write_prism_module, write_results, ExportBundle, ExportFile, FileRole,
};
pub use expr::{eval_ast, free_variables, parse_expression, Expr};
pub use gridding::{
    adaptive_refine, delta_for_error, estimate_cardinality, local_error_bounds,
    maxmin_error_bounds, split_cell, uniform_error_bound, uniform_partition, AdaptiveMode, Cell,
    CertMode, ErrorCertificate, Partition, Refinement,
};
pub use lipschitz::{
    global_input_lipschitz, global_state_lipschitz, local_lipschitz_matrix, local_lipschitz_vector,
    LipMethod, LipschitzEstimate, LocalLipschitzTable, SamplingConfig,
};
pub use model::{
    eval_density, gaussian_mean_cov, validate_model, Kernel, Model, Rect, ValidationReport,
};
pub use verification::{
    query_initial, reach_avoid_dp_mc, reach_avoid_dp_mdp, safety_dp_mc, safety_dp_mdp, Objective,
    Policy, QueryResult, ValueFunction,
};
