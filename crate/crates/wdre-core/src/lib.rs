//! Distributionally robust estimation for linear-Gaussian observation
//! models under Wasserstein (Gelbrich) ambiguity.
//!
//! The crate answers three questions about the estimation problem
//! `y = H x + w` when the distributions of the signal `x` and the noise `w`
//! are only known up to Gelbrich balls around nominal Gaussians:
//!
//! 1. What is the best worst-case performance an affine estimator can
//!    guarantee, and which estimator attains it?
//! 2. Which distributions in the ambiguity sets are least favorable?
//! 3. Does the robust-estimation game have a saddle point, so that the
//!    pessimistic and optimistic orderings of the two players coincide?
//!
//! All three reduce to small dense semidefinite programs, solved by the
//! self-contained interior-point method in [`sdp`]. The [`wdre`] module
//! builds those programs, extracts estimators and least-favorable
//! parameters from their solutions, and certifies saddle-point existence
//! through an explicit negative-semidefiniteness test. [`experiments`]
//! packages reproducible studies on top of that, and the `wdre` binary in
//! the companion CLI crate exposes everything on the command line.
//!
//! Numerical kernels are generic over the scalar type through
//! [`scalar::Scalar`] (with `f64` and `f32` profiles); the solver-facing
//! layers fix `f64`, and the crate root re-exports `f64` aliases for the
//! common types.

pub mod experiments;
pub mod linalg;
pub mod model;
pub mod scalar;
pub mod sdp;
pub mod wdre;

/// Dense `f64` matrix, the default throughout the solver layers.
pub type Mat = linalg::Mat<f64>;
/// Symmetric `f64` matrix.
pub type SymMatrix = linalg::SymMatrix<f64>;
/// Eigendecomposition of a symmetric `f64` matrix.
pub type SymEigen = linalg::SymEigen<f64>;
/// Gaussian moment pair at `f64`.
pub type GaussianSpec = model::GaussianSpec<f64>;
/// Observation model at `f64`.
pub type ObservationModel = model::ObservationModel<f64>;
/// Affine estimator at `f64`.
pub type AffineEstimator = model::AffineEstimator<f64>;
/// Ambiguity description at `f64`.
pub type AmbiguitySpec = model::AmbiguitySpec<f64>;
/// Full problem statement at `f64`.
pub type ProblemInstance = model::ProblemInstance<f64>;
