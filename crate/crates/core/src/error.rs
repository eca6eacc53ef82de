//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular momentum at t = {t}: |J| = {norm:e} is below the threshold {threshold:e}")]
    SingularMomentum { t: f64, norm: f64, threshold: f64 },

    #[error("capacity error: {nodes} nodes exceeds the exact-solver cap of {cap}; use the entropic method")]
    Capacity { nodes: usize, cap: usize },

    #[error("iteration error: {what} did not converge after {iters} iterations (residual {residual:e})")]
    Iteration {
        what: String,
        iters: usize,
        residual: f64,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
