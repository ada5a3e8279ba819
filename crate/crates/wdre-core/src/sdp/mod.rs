//! Self-contained primal-dual interior-point solver for small dense
//! semidefinite programs.
//!
//! Problems are stated in maximization form over a product of PSD cones and
//! nonnegative scalars, with labeled equality and inequality rows so dual
//! variables can be pulled out by name. Linear matrix inequalities are added
//! as groups: a slack PSD block plus one equality row per upper-triangle
//! entry, whose duals reassemble into the LMI's dual matrix.
//!
//! The solver is a homogeneous self-dual embedding with Nesterov-Todd
//! scaling and a Mehrotra predictor-corrector, factorizing a dense Schur
//! complement each iteration. It is deliberately dense and single-threaded:
//! the target problems have a handful of blocks of dimension tens, where
//! robustness and determinism matter more than asymptotics.

mod kkt;
mod problem;
mod solve;

pub use kkt::{kkt_residuals, KktResiduals};
pub(crate) use problem::trace_coeff;
pub use problem::{BlockId, Coeff, ConeSpec, LmiBuilder, SdpProblem, Sense};
pub use solve::{solve_sdp, DualValue, PrimalBlock, SdpSolution, SolveOptions, SolveStatus};
