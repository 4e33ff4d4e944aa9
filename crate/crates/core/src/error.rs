use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("scene has no obstacles")]
    EmptyScene,

    #[error("parameter {value} outside domain [{min}, {max}]")]
    Domain { value: f64, min: f64, max: f64 },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error(transparent)]
    Numeric(#[from] crate::autodiff::AdError),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("capacity exceeded: {count} obstacles, descriptor holds {capacity}")]
    Capacity { count: usize, capacity: usize },

    #[error("generation failed after {tries} tries: {reason}")]
    Generation { tries: usize, reason: String },

    #[error("unsupported instance: {0}")]
    Unsupported(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training diverged at step {step}: {reason}")]
    TrainingDiverged {
        step: usize,
        reason: String,
        /// JSON dump of the offending batch.
        batch_dump: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
