use thiserror::Error;

/// Errors surfaced by the numeric core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension {0} unsupported (supported range: 3..=8)")]
    BadDimension(usize),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("problem size exceeds configured cap: {0}")]
    SizeExceeded(String),

    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),

    #[error("factorization failed at pivot {pivot} (diag was {diag:.3e}); {detail}")]
    Factorization {
        pivot: usize,
        diag: f64,
        detail: String,
    },

    #[error("point already present in set: {0}")]
    DuplicatePoint(String),

    #[error("no strategy known for this dimension: {0}")]
    UnknownStrategy(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
