use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution spec `{spec}`: {reason}")]
    DistributionSpec { spec: String, reason: String },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("confidence level {delta} outside the admissible range [{min}, {max})")]
    DeltaOutOfRange { delta: f64, min: f64, max: f64 },

    #[error("sample of size {n} is too small: {reason}")]
    SampleTooSmall { n: usize, reason: String },

    #[error("sample values must be finite and non-empty")]
    InvalidSample,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}
