//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Least-squares system on the named active set has no unique solution.
    #[error("rank-deficient least-squares system on atoms {atoms:?}")]
    RankDeficient { atoms: Vec<usize> },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("malformed container: {0}")]
    Container(String),

    #[error("malformed key material: {0}")]
    KeyFormat(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CsError>;
