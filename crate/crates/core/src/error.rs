use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or feature shapes do not conform.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A numerically undefined request (empty rows, zero probability, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// API misuse, e.g. backward on an empty tape.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("ingestion error at row {row}, column `{column}`: {message}")]
    Ingestion {
        row: usize,
        column: String,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate ratio: {0}")]
    DegenerateRatio(String),

    #[error(
        "non-finite loss at epoch {epoch}, batch {batch} (nll = {nll}, knowledge = {knowledge})"
    )]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        nll: f64,
        knowledge: f64,
    },

    #[error("schema fingerprint mismatch: model has {model}, dataset has {dataset}")]
    Fingerprint { model: String, dataset: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad configuration or usage rather than by a
    /// failure while doing the work.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Usage(_) | Error::Ingestion { .. } | Error::Fingerprint { .. }
        ) || matches!(self, Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
