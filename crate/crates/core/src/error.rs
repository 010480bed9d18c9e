use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = GraspError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GraspError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("degenerate plane fit: {0}")]
    DegenerateFit(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("unknown shape `{0}`")]
    UnknownShape(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl GraspError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        GraspError::InvalidArgument(msg.into())
    }
}
