use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("dataset is empty")]
    Empty,

    #[error("index {0} is not a positive-label sample")]
    NotPositive(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The request is well formed but exceeds an explicit size limit.
    #[error("refused: {0}")]
    TooLarge(String),

    #[error("degenerate instance: {0}")]
    Degenerate(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
