use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid cluster index {index} (K = {k})")]
    InvalidCluster { index: usize, k: usize },

    #[error("invalid object index {index} (n = {n})")]
    InvalidObject { index: usize, n: usize },

    /// Input data could not be parsed or does not fit the requested model.
    #[error("malformed input: {0}")]
    Data(String),

    /// A hyperparameter or option is outside its allowed range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A posterior scale matrix could not be factorized even after jitter.
    #[error("numerical failure in cluster {cluster}: {reason}")]
    Numerical { cluster: usize, reason: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
