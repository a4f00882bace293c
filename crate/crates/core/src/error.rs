use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of a physical model.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A value violated an operation's contract (e.g. |x| > 1 fed to a write mapping).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("calibration failed for {direction}: {reason} (worst residual {residual:.3e})")]
    Calibration {
        direction: String,
        reason: String,
        residual: f64,
    },

    #[error("write phase does not match crossbar architecture: {0}")]
    ArchMismatch(String),

    #[error("unsupported schedule: {0}")]
    UnsupportedSchedule(String),

    #[error("nodal system is singular: {0}")]
    SingularNetwork(String),

    #[error("dataset {path}: {reason}")]
    Dataset { path: PathBuf, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("state dump parse error at line {line}: {reason}")]
    Dump { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dataset(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Dataset {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag used in the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Contract(_) => "contract",
            Error::Calibration { .. } => "calibration",
            Error::ArchMismatch(_) => "arch_mismatch",
            Error::UnsupportedSchedule(_) => "unsupported_schedule",
            Error::SingularNetwork(_) => "singular_network",
            Error::Dataset { .. } => "dataset",
            Error::Config(_) => "config",
            Error::Dump { .. } => "dump",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}
