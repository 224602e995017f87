use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the recovery pipeline.
///
/// Variants are grouped by class so the command-line front end can map each
/// class to its own exit code (see [`Error::class`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("channel {channel} is constant (min = max = {value}); cannot normalize")]
    DegenerateChannel { channel: usize, value: f64 },

    #[error("insufficient data: {available} samples available, {required} required")]
    InsufficientData { available: usize, required: usize },

    #[error("index {index} out of range (limit {limit})")]
    Index { index: usize, limit: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("state error: {0}")]
    State(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("aliasing: mode frequency {frequency} Hz is not below Nyquist ({nyquist} Hz)")]
    Aliasing { frequency: f64, nyquist: f64 },

    #[error("MAC undefined: {0}")]
    UndefinedMac(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error class used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::State(_) | Error::Shape(_) | Error::Aliasing { .. } => {
                ErrorClass::Config
            }
            Error::Parse { .. }
            | Error::DegenerateChannel { .. }
            | Error::InsufficientData { .. }
            | Error::Index { .. }
            | Error::Dimension(_)
            | Error::Checkpoint(_) => ErrorClass::Data,
            Error::Divergence { .. } | Error::Numerical(_) | Error::UndefinedMac(_) => {
                ErrorClass::Numerical
            }
            Error::Io { .. } => ErrorClass::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
