use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum YatError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("invalid parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("non-finite input in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("{0}")]
    Precondition(String),

    #[error("Gram matrix is singular (duplicate or near-coincident nodes): {0}")]
    SingularGram(String),

    #[error("factorization failed even after diagonal jitter {jitter:e}")]
    FactorizationFailed { jitter: f64 },

    #[error("quadrature did not stabilize after node doubling (last change {last_change:e} at {nodes} nodes)")]
    QuadratureNotConverged { nodes: usize, last_change: f64 },

    #[error("spectrum truncation insufficient: tail estimate {tail:e} exceeds {limit:e}")]
    TruncationInsufficient { tail: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, YatError>;
