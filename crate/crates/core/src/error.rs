//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors produced by certification, synthesis and construction routines.
///
/// Structural errors (dimension or form mismatches) are distinguished from
/// certificate failures (`NotPsd`, `NotSymplectic`, `InvalidChannel`, ...)
/// so callers can branch on the verdict they care about.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid symplectic form: {0}")]
    InvalidForm(String),

    #[error("form mismatch: {0}")]
    FormMismatch(String),

    #[error("invalid tolerance configuration: {0}")]
    InvalidConfig(String),

    #[error("matrix is not symmetric within tolerance (residual {residual:.3e})")]
    NotSymmetric { residual: f64 },

    #[error("matrix is not skew-symmetric within tolerance (residual {residual:.3e})")]
    NotSkewSymmetric { residual: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },

    #[error("matrix is not symplectic for the given form (residual {residual:.3e})")]
    NotSymplectic { residual: f64 },

    #[error("matrix is not orthogonal (residual {residual:.3e})")]
    NotOrthogonal { residual: f64 },

    #[error("matrix lacks the [[A, B], [-B, A]] block structure (residual {residual:.3e})")]
    BlockStructureViolated { residual: f64 },

    #[error("matrix is not a positive contraction (offending eigenvalue {eig:.6e})")]
    NotContraction { eig: f64 },

    #[error("columns do not form a symplectic set (worst pairing error {residual:.3e})")]
    NotSymplecticSet { residual: f64 },

    #[error("covariance matrix is not admissible (min eigenvalue {min_eig:.6e})")]
    NotAdmissible { min_eig: f64 },

    #[error("thermal occupation must be >= 1, got {nu}")]
    InvalidTemperature { nu: f64 },

    #[error("channel parameters fail the existence certificate (min eigenvalue {min_eig:.6e})")]
    InvalidChannel { min_eig: f64 },

    #[error("symplectic basis completion degenerated: {0}")]
    ExtensionFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
