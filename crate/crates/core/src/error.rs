use thiserror::Error;

/// Errors produced by the toolkit.
///
/// `Validation` and `Dimension` describe bad inputs; the remaining variants
/// are numerical failures (non-convergence, truncation limits).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{what} did not converge (best estimate {estimate:e}, error estimate {error_estimate:e})")]
    NonConvergence {
        what: &'static str,
        estimate: f64,
        error_estimate: f64,
    },

    #[error("density is not normalizable within {tol:e}: total mass {mass}")]
    NotNormalizable { mass: f64, tol: f64 },

    #[error("truncation insufficient: {0}")]
    Truncation(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by the caller's input rather than by numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation { .. } | Error::Dimension(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
