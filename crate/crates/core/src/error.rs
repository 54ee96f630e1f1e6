use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the data, loss, model and training layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("{path}: row {row}, column '{column}': cannot parse {value:?} as a finite number")]
    NonNumericCell {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{0}: file has no data rows")]
    EmptyFile(PathBuf),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("series too short: {0}")]
    TooShort(String),

    #[error("non-finite value in {array} at flat index {index}")]
    NonFinite { array: String, index: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
