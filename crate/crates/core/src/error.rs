use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("Lanczos did not reach the residual tolerance within {0} iterations")]
    NoConvergence(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dimension {dim} exceeds the limit {limit}")]
    DimensionGuard { dim: u128, limit: u128 },

    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state is not normalized (norm = {0})")]
    NotNormalized(f64),

    #[error("vector is not a unit vector (norm = {0})")]
    NotUnit(f64),

    #[error("scan window too small: minimizer hit s_max = {0}")]
    SMaxTooSmall(f64),

    #[error("bad exponents: need 0 <= beta1 <= beta2 and beta2 > 0, got ({0}, {1})")]
    BadExponents(f64, f64),

    #[error("reduced density matrix order k = {k} outside 0..={n}")]
    BadK { k: usize, n: usize },

    #[error("operator is not an orthogonal projector (defect {0:e})")]
    NotProjector(f64),

    #[error("exact Haar quadrature not available for m = {m}, N = {n}")]
    QuadratureBudget { m: usize, n: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),
}

pub type Result<T> = std::result::Result<T, Error>;
