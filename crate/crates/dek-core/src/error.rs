//! Error type shared across the crate.
//!
//! Every variant carries a stable machine-readable code (`DekError::code`)
//! so the CLI can print single-line, parseable failures.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, DekError>;

#[derive(Debug, Error)]
pub enum DekError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("training diverged at iteration {iteration}: {reason}")]
    Diverged { iteration: usize, reason: String },

    #[error("kernel matrix carries no variance after centering")]
    NoVariance,

    #[error("csv parse failure in {path}: {reason}")]
    CsvFormat { path: String, reason: String },

    #[error("model file {path}: {reason}")]
    ModelFormat { path: String, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl DekError {
    /// Stable error code for machine-readable CLI output.
    pub fn code(&self) -> &'static str {
        match self {
            DekError::DimensionMismatch { .. } => "E_DIM",
            DekError::NonFinite(_) => "E_NONFINITE",
            DekError::InvalidConfig(_) => "E_CONFIG",
            DekError::InvalidInput(_) => "E_INPUT",
            DekError::Empty(_) => "E_EMPTY",
            DekError::Diverged { .. } => "E_DIVERGED",
            DekError::NoVariance => "E_NOVARIANCE",
            DekError::CsvFormat { .. } => "E_CSV",
            DekError::ModelFormat { .. } => "E_MODEL",
            DekError::Io { .. } => "E_IO",
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        DekError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
