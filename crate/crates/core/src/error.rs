use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file; `offset` is the byte position of the problem.
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    /// Caller violated a precondition.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("vector {0} not found")]
    NotFound(u32),

    #[error("lookup error: {0}")]
    Lookup(String),

    /// On-disk data failed a consistency check; `block` is the absolute block
    /// index within the offending file.
    #[error("corruption in block {block}: {reason}")]
    Corruption { block: u64, reason: String },

    #[error("infeasible metadata budget: beta {beta} must exceed alpha/1024 = {floor}")]
    InfeasibleBudget { beta: f64, floor: f64 },

    #[error("startup error on {path}: {reason}")]
    Startup { path: PathBuf, reason: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn startup(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Startup { path: path.into(), reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
