use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("map produced a non-finite value at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("history index {got} is not greater than the newest stored index {newest}")]
    NonMonotoneIndex { newest: usize, got: usize },

    #[error(
        "regularization weight requested for a zero residual; the solve should have terminated"
    )]
    ZeroResidual,

    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
