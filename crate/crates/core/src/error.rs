use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged at epoch {epoch}, batch {batch} (non-finite {what}); last good epoch: {last_good_epoch:?}")]
    Diverged {
        epoch: usize,
        batch: usize,
        what: &'static str,
        /// Index of the last fully completed epoch, if any epoch completed.
        last_good_epoch: Option<usize>,
    },

    /// A training run stopped early; carries the last checkpoint written
    /// before the failure, if any.
    #[error("{cause}; last good checkpoint: {}", .checkpoint.as_ref().map_or_else(|| "none".to_string(), |p| p.display().to_string()))]
    Aborted {
        cause: Box<Error>,
        checkpoint: Option<PathBuf>,
    },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("corrupt file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("unsupported format version {found} in {path} (expected {expected})")]
    Version {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("incompatible artifacts: {0}")]
    Incompatible(String),

    #[error("parse error at `{key}`: {reason}")]
    Parse { key: String, reason: String },

    #[error("missing input: {0}")]
    Missing(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
