use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Tensor or array dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A precondition of an operation was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A metric was evaluated outside its domain (e.g. constant targets for NMPIW).
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed input files.
    #[error("{path}: {message}")]
    Ingestion { path: PathBuf, message: String },

    /// Training produced a non-finite loss.
    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFinite { epoch: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}
