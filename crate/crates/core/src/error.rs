use thiserror::Error;

pub type Result<T> = std::result::Result<T, BfeError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BfeError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite loss at finite-difference probe along coordinate {coordinate}")]
    NonFiniteProbe { coordinate: usize },

    #[error("non-finite {what} during evaluation")]
    NonFinite { what: &'static str },

    #[error("run failed at step {step}: {reason}")]
    RunFailure { step: usize, reason: String },

    #[error("csv error: {0}")]
    Csv(String),
}

impl From<csv::Error> for BfeError {
    fn from(err: csv::Error) -> Self {
        BfeError::Csv(err.to_string())
    }
}
