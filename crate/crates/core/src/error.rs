use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid size {0}: must be a power of two >= 4")]
    InvalidGrid(usize),

    #[error("grid mismatch: {0} vs {1}")]
    GridMismatch(usize, usize),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("field is not Hermitian at mode ({k1}, {k2}): mismatch {mismatch:.3e}")]
    SymmetryViolation { k1: i64, k2: i64, mismatch: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("resource guard: {0}")]
    Resource(String),

    #[error("structural error: {0}")]
    Structural(String),

    #[error("malformed snapshot: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
