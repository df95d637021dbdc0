//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Errors raised by mesh construction, assembly, solvers, and diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on user-supplied input was violated.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A structural invariant of a mesh or matrix was violated.
    #[error("structural error: {0}")]
    Structural(String),

    /// Dimensions of two objects that must agree do not.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A linear solve or eigenvalue iteration failed to reach its tolerance.
    #[error("numerical failure: {message} (residual {residual:.3e})")]
    Numerical { message: String, residual: f64 },

    /// A named builtin (initial data set, model) does not exist.
    #[error("unknown name: {0}")]
    UnknownName(String),

    /// The detailed-balance condition required by the entropy machinery fails.
    #[error("detailed balance violated: |alpha*lambda*sigma*xi/(beta*gamma*kappa*eta) - 1| = {residual:.3e} exceeds {tolerance:.1e}")]
    DetailedBalance { residual: f64, tolerance: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
