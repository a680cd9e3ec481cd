use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid lag {lag}: must be below the sample length {len}")]
    InvalidLag { lag: usize, len: usize },

    #[error("dimension mismatch: expected {expected} variables, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("AR coefficient {0} is outside (-1, 1); the filter would not be stationary")]
    NonstationaryFilter(f64),

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures that stem from the data or the null model rather
    /// than from I/O or usage.
    pub fn is_statistical_abort(&self) -> bool {
        matches!(self, Error::Degenerate(_) | Error::Calibration(_))
    }
}
