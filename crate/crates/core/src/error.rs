use std::path::PathBuf;

use crate::solvers::SolveTrace;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A negative power of a zero base, e.g. eps = 0 with q < 2 on a flat region.
    #[error("singular coefficient at {location}: zero base raised to negative power {exponent}")]
    Singular { location: String, exponent: f64 },

    #[error("{solver} diverged at iteration {iteration} (non-finite objective)")]
    Divergence {
        solver: String,
        iteration: usize,
        trace: Box<SolveTrace>,
    },

    #[error("parse error in {path} at byte {offset}: {message}")]
    Parse {
        path: PathBuf,
        offset: usize,
        message: String,
    },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
