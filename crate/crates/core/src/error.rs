use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong inside the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: unknown label token {token:?} (expected \"s\" or \"b\")")]
    UnknownLabel { line: u64, token: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("split leaves the {part} partition empty")]
    EmptyPartition { part: &'static str },

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training data contains a single class")]
    SingleClass,

    #[error("first boosting stage is no better than chance (weighted error {epsilon})")]
    NoUsableStage { epsilon: f64 },

    #[error("model has no stages")]
    EmptyModel,

    #[error("unsupported model format: {0}")]
    ModelVersion(String),

    #[error("corrupted model file: {0}")]
    ModelCorrupt(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
