use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid field: non-finite value {value} at node {index}")]
    InvalidField { index: usize, value: f64 },

    #[error("grid mismatch: fields live on different spatial grids")]
    GridMismatch,

    #[error("non-finite drift evaluation at node {index}")]
    NonFinite { index: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("solver failure at step {step} (t = {time}): {reason}")]
    SolverFailure { step: usize, time: f64, reason: String },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
