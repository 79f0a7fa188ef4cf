use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("circulant embedding is not nonnegative definite: min eigenvalue {min} vs max {max}")]
    EmbeddingNotPsd { min: f64, max: f64 },

    #[error("covariance is not positive definite: pivot {pivot:e} at row {row}")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("grid of {points} points exceeds the cap of {cap}")]
    GridTooLarge { points: u64, cap: u64 },

    #[error("integral diverges: Fourier transform at the origin is {value} (f is not mean-zero)")]
    DivergentIntegral { value: f64 },

    #[error("dimension {0} is not supported by this operation")]
    UnsupportedDimension(usize),

    #[error("walk exhausted its budget of {budget} steps before reaching level {level}")]
    HorizonExhausted { budget: u64, level: u64 },

    #[error("quadrature did not converge: estimated error {error:e} after {intervals} subintervals")]
    Quadrature { error: f64, intervals: usize },

    #[error("non-finite value produced: {0}")]
    NonFinite(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
