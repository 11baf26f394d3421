use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} did not converge after {iterations} iterations (last change {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("non-finite values in {what} at t = {time}")]
    NonFinite { what: &'static str, time: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("secular leakage {leak:.3e} above tolerance {tol:.1e} at tau = {tau}")]
    SecularLeakage { leak: f64, tol: f64, tau: f64 },

    #[error("operation not available on this geometry: {0}")]
    Unsupported(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
