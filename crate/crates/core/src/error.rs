//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failure modes of the linear algebra kernels, the barrier solver, and the
/// file loaders. Variants carry the measured quantity that tripped the check
/// so callers can report actionable diagnostics.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A matrix expected to be positive definite has an eigenvalue at or
    /// below the configured floor.
    #[error("matrix is not positive definite: min eigenvalue {min_eig:e} <= floor {floor:e}")]
    NotPositiveDefinite { min_eig: f64, floor: f64 },

    /// Two symmetric matrices admit no finite two-sided scaling factor
    /// because a generalized eigenvalue is nonpositive.
    #[error("matrices are not comparable in the semidefinite order: generalized eigenvalue {min_eig:e} <= 0")]
    NotComparable { min_eig: f64 },

    /// The slack matrix at the queried point is not strictly inside the
    /// positive semidefinite cone.
    #[error("point is not strictly feasible: slack min eigenvalue {min_eig:e} <= floor {floor:e}")]
    NotStrictlyFeasible { min_eig: f64, floor: f64 },

    /// The Hessian is singular to working precision and cannot be inverted.
    #[error("hessian is singular to working precision: min eigenvalue {min_eig:e} < 1e-14 * max eigenvalue {max_eig:e}")]
    SingularHessian { min_eig: f64, max_eig: f64 },

    /// The random instance generator failed to draw linearly independent
    /// constraint matrices.
    #[error("constraint matrices remained rank deficient after {attempts} attempts")]
    RankDeficientConstraints { attempts: usize },

    /// The noise injector failed to produce a usable perturbation draw.
    #[error("noise rescaling failed after {attempts} attempts (degenerate random draw)")]
    RescaleFailure { attempts: usize },

    /// A barrier step left the positive semidefinite cone, meaning the
    /// injected perturbations exceeded the robustness budget.
    #[error("iterate left the cone at iteration {iteration}: new slack min eigenvalue {min_eig:e}")]
    LeftCone { iteration: usize, min_eig: f64 },

    /// The starting point does not satisfy the entry proximity requirement.
    #[error("initial point is off the central path: potential {potential:e} exceeds budget {budget:e}")]
    InitNotOnPath { potential: f64, budget: f64 },

    /// A Kronecker product would exceed the configured size cap.
    #[error("kronecker product too large: {rows} x {cols} exceeds the configured cap")]
    InstanceTooLarge { rows: usize, cols: usize },

    /// The iterative eigendecomposition or SVD failed to converge.
    #[error("eigendecomposition did not converge")]
    EigFailed,

    /// A file, config field, or argument failed validation.
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    /// Reading or writing a file failed.
    #[error("io error: {0}")]
    Io(String),

    /// A JSON document could not be parsed or serialized.
    #[error("json error: {0}")]
    Json(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

impl Error {
    /// Shorthand for a validation failure tied to a named field.
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
