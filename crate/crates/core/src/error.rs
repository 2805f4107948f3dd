//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by tensor construction, linear-algebra kernels, the
/// decomposition pipelines, and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("rank {rank} out of range for {context} (max {max})")]
    RankOutOfRange {
        context: &'static str,
        rank: usize,
        max: usize,
    },

    #[error("matrix is not Hermitian within tolerance: relative deviation {deviation:.3e}")]
    NotHermitian { deviation: f64 },

    #[error("degenerate input in {context}: {detail}")]
    Degenerate { context: &'static str, detail: String },

    #[error("iteration diverged in {context}: {detail}")]
    Diverged { context: &'static str, detail: String },

    #[error("insufficient data: {detail}")]
    InsufficientData { detail: String },

    #[error("bad tensor file: {detail}")]
    BadFile { detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(context: &'static str, expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            context,
            expected: expected.into(),
            got: got.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
