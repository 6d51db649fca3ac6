//! Error type shared by every module of the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument {value} outside the domain of {what} (supremum {sup})")]
    Domain { what: &'static str, value: f64, sup: f64 },

    #[error("grid too narrow: estimated mass outside grid {leak:e} exceeds tolerance {tol:e}")]
    GridTooNarrow { leak: f64, tol: f64 },

    #[error("negative ringing after FFT removed mass {clipped:e} (limit {limit:e})")]
    ClippedMass { clipped: f64, limit: f64 },

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("quadrature did not converge: achieved relative error {achieved:e}, requested {requested:e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    #[error("root solver failed for target {target}: {reason}")]
    RootSolver { target: f64, reason: String },

    #[error("calibration infeasible at t={t}, r={r} ({side} envelope): {detail}")]
    InfeasibleCalibration { t: f64, r: f64, side: &'static str, detail: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
