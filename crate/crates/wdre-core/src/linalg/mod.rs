//! Dense matrix utilities shared by every other module.
//!
//! The centerpiece is [`SymMatrix`], a symmetric matrix with an enforced
//! symmetry invariant and spectral operations built on a cyclic Jacobi
//! eigendecomposition: [`SymMatrix::psd_sqrt`], [`SymMatrix::pseudo_inverse`]
//! and [`SymMatrix::nsd_margin`]. General rectangular arithmetic lives on
//! [`Mat`].
//!
//! Everything here is deliberately dense and single-threaded: the problem
//! sizes this toolkit targets (dimensions up to a few tens) never justify
//! sparse formats, and all functions are pure so concurrent callers can share
//! values freely.

mod mat;
mod sym;

pub use mat::{dot, norm2, Mat};
pub use sym::{SymEigen, SymMatrix};

use thiserror::Error;

/// Errors produced by the dense kernels.
#[derive(Debug, Clone, Error)]
pub enum LinalgError {
    /// The input of a symmetric constructor was too far from symmetric.
    #[error("matrix is not symmetric: max |M_ij - M_ji| = {max_asymmetry:.3e} exceeds {tolerance:.3e}")]
    NotSymmetric { max_asymmetry: f64, tolerance: f64 },

    /// An eigenvalue fell below the PSD tolerance where a positive
    /// semidefinite input was required.
    #[error("matrix is not positive semidefinite: min eigenvalue {min_eigenvalue:.3e} is below -{tolerance:.3e}")]
    NotPsd { min_eigenvalue: f64, tolerance: f64 },

    /// A Cholesky pivot was not positive.
    #[error("matrix is not positive definite: pivot {index} is not positive")]
    NotPositiveDefinite { index: usize },

    /// Operand shapes do not line up.
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },
}
