//! Exact and asymptotic distribution of the largest eigenvalue of
//! `W1 W2^{-1}` for complex Wishart matrices with a rank-one spike, and the
//! detection performance that follows from it.

pub mod asymptotic;
pub mod detmat;
pub mod error;
pub mod finite_cdf;
pub mod monte_carlo;
pub mod roc;
pub mod specfun;

pub use error::{Error, Result};
pub use finite_cdf::{ProblemDims, SpikeParam};

pub use specfun::LogScaled;
