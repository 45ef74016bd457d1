//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("evaluation error in `{node}`: {message}")]
    Eval { node: String, message: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("kernel is singular at the evaluation point: {0}")]
    SingularKernel(String),

    #[error("operation unsupported for this kernel variant: {0}")]
    UnsupportedVariant(String),

    #[error("Lipschitz estimation failed at sample point {point:?}: {message}")]
    LipschitzEstimation { point: Vec<f64>, message: String },

    #[error("partition would have {requested} cells, exceeding the cap of {cap}")]
    Capacity { requested: usize, cap: usize },

    #[error("refinement budget of {max_cells} cells exceeded; best certified error {best_error}")]
    BudgetExceeded { max_cells: usize, best_error: f64 },

    #[error("integration accuracy failure: {0}")]
    IntegrationAccuracy(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid problem configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("negative horizon is not allowed")]
    NegativeHorizon,

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Other(String),
}

impl Error {
    /// Process exit code contract: 1 for validation problems, 2 for capacity
    /// limits, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::UnknownIdentifier { .. }
            | Error::InvalidModel(_)
            | Error::DimensionMismatch(_)
            | Error::Config(_)
            | Error::NegativeHorizon
            | Error::UnsupportedVariant(_)
            | Error::Io(_) => 1,
            Error::Capacity { .. } | Error::BudgetExceeded { .. } => 2,
            Error::Eval { .. }
            | Error::SingularKernel(_)
            | Error::LipschitzEstimation { .. }
            | Error::IntegrationAccuracy(_)
            | Error::Other(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
