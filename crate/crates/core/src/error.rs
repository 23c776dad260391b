use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator and the diagnosis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its documented bounds.
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// Matrix or vector dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Input data is unusable (non-finite, too few rows, ...).
    #[error("data error: {0}")]
    Data(String),

    /// A numeric argument lies outside the function's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A required dataset or model is missing.
    #[error("missing dataset for fault class `{0}`")]
    Completeness(String),

    /// A label is not part of the configured class order.
    #[error("label `{0}` is not in the class order")]
    Label(String),

    /// An operation was called on an object in an unusable state.
    #[error("invalid state: {0}")]
    State(String),

    /// Stratified splitting cannot be performed.
    #[error("stratification error: {0}")]
    Stratification(String),

    /// A classifier could not be trained.
    #[error("training error: {0}")]
    Training(String),

    /// A trained model failed a quality gate.
    #[error("model bank quality gate failed: {0}")]
    QualityGate(String),

    /// A text artifact could not be parsed.
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
