use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Input is structurally wrong (lengths, sizes, empty collections).
    #[error("shape error: {0}")]
    Shape(String),

    /// Argument outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The model or generator failed a validation check.
    #[error("validation failed: {0}")]
    Validation(String),

    /// An evaluator returned a non-finite value.
    #[error("evaluator failure at x = {x:?}, regime {i}{}: {reason}", .j.map(|j| format!(" -> {j}")).unwrap_or_default())]
    Evaluator {
        x: Vec<f64>,
        i: usize,
        j: Option<usize>,
        reason: String,
    },

    /// The criterion's hypotheses do not hold for this input.
    #[error("criterion not applicable: {0}")]
    NotApplicable(String),

    #[error("matrix is not a Z-matrix; leading-minor mode requires nonpositive off-diagonals")]
    ModeMismatch,

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Caller broke an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("explosion detected on path {path} at step {step}")]
    ExplosionDetected { path: u64, step: usize },

    #[error("parse error: {0}")]
    Parse(String),
}
