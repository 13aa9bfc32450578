use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Matrix shapes do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    /// A parameter exceeds the supported numerical envelope.
    #[error("{what} = {value} exceeds the supported cap of {cap}")]
    OutOfEnvelope {
        what: &'static str,
        value: usize,
        cap: usize,
    },

    /// Invalid detector dimensions or other configuration.
    #[error("invalid parameters: {0}")]
    InvalidParameter(String),

    /// An index fell outside the admissible range.
    #[error("index {name} = {value} outside [{lo}, {hi}]")]
    IndexOutOfRange {
        name: &'static str,
        value: usize,
        lo: usize,
        hi: usize,
    },

    /// Cholesky factorization met a non-positive pivot.
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    /// Jacobi eigenvalue sweeps did not reduce the off-diagonal mass.
    #[error("eigenvalue iteration failed to converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    /// An exact probability identity evaluated outside [0, 1].
    #[error("numerical conditioning failure: probability evaluated to {value:e}")]
    Conditioning { value: f64 },

    /// Root bracketing for threshold calibration failed.
    #[error("could not bracket root in [{lo:e}, {hi:e}]")]
    Bracketing { lo: f64, hi: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
