//! Scalar abstraction for the dense numerical kernels.
//!
//! The matrix layer ([`crate::linalg`]) and the estimation vocabulary
//! ([`crate::model`]) are generic over a [`Scalar`] so the same code runs at
//! `f64` (the default everywhere in this toolkit) and at `f32` when a caller
//! prefers bandwidth over accuracy. Tolerances are part of the abstraction:
//! a symmetry threshold that is meaningful for `f64` is indistinguishable
//! from rounding noise at `f32`, so every scalar type carries its own set of
//! default thresholds.
//!
//! All thresholds are *relative*; call sites scale them by a magnitude of the
//! data at hand (largest entry, Frobenius norm, top eigenvalue) before
//! comparing.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar together with the tolerance profile used by the
/// dense kernels.
pub trait Scalar:
    Float + NumAssign + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Relative asymmetry tolerated by the symmetric-matrix constructor.
    fn sym_tol() -> Self;

    /// Relative eigenvalue slack below zero accepted by the PSD square root
    /// before the input is rejected as indefinite.
    fn psd_eig_tol() -> Self;

    /// Default relative rank cutoff of the pseudo-inverse.
    fn pinv_rtol() -> Self;

    /// Default relative tolerance for declaring a matrix negative
    /// semidefinite from its largest eigenvalue.
    fn nsd_tol() -> Self;

    /// Off-diagonal convergence threshold of the Jacobi eigensolver,
    /// relative to the Frobenius norm of the input.
    fn jacobi_tol() -> Self;

    /// Lossless-enough conversion from an `f64` literal; panics on values a
    /// finite float cannot represent, which never happens for the constants
    /// used internally.
    fn real(v: f64) -> Self {
        Self::from_f64(v).expect("literal must be representable")
    }

    /// Conversion to `f64` for error reporting and serialization.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar must convert to f64")
    }
}

impl Scalar for f64 {
    fn sym_tol() -> Self {
        1e-12
    }
    fn psd_eig_tol() -> Self {
        1e-10
    }
    fn pinv_rtol() -> Self {
        1e-10
    }
    fn nsd_tol() -> Self {
        1e-7
    }
    fn jacobi_tol() -> Self {
        1e-14
    }
}

impl Scalar for f32 {
    fn sym_tol() -> Self {
        1e-4
    }
    fn psd_eig_tol() -> Self {
        1e-4
    }
    fn pinv_rtol() -> Self {
        1e-5
    }
    fn nsd_tol() -> Self {
        1e-3
    }
    fn jacobi_tol() -> Self {
        1e-6
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_round_trip() {
        assert_eq!(f64::real(2.5), 2.5);
        assert_eq!(f32::real(2.5), 2.5f32);
        assert_eq!(2.5f64.as_f64(), 2.5);
    }

    #[test]
    fn f32_thresholds_are_coarser() {
        assert!(f32::sym_tol() > f64::sym_tol() as f32);
        assert!(f32::nsd_tol() > f64::nsd_tol() as f32);
    }
}
