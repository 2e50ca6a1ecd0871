//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A ball or shell used by an averaging operator contains no sample
    /// points besides (possibly) its own center.
    #[error("degenerate support at point {point} (t = {time}, r = {radius}): {what}")]
    DegenerateSupport {
        point: usize,
        time: f64,
        radius: f64,
        what: &'static str,
    },

    /// Requested a closed-form quantity on a backend that has no oracle for it.
    #[error("unsupported oracle: {0}")]
    UnsupportedOracle(String),

    /// Least-squares extrapolation was too ill-conditioned to trust.
    #[error("unstable fit: {0}")]
    UnstableFit(String),

    /// Transport marginals do not carry equal mass.
    #[error("infeasible marginals: |mass1 - mass2| = {gap:e} exceeds {tol:e}")]
    InfeasibleMarginals { gap: f64, tol: f64 },

    /// The entropic solver ran out of iterations before meeting its tolerance.
    #[error("entropic solver did not converge after {iters} iterations (marginal error {err:e})")]
    EntropicNonConvergence { iters: usize, err: f64 },

    /// A density produced by propagation dipped below the negativity floor.
    #[error("negative density {value:e} at point {point} (below floor {floor:e})")]
    NegativeDensity {
        point: usize,
        value: f64,
        floor: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
