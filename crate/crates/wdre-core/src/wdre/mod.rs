//! Robust estimation over Gelbrich balls: the three semidefinite programs,
//! multiplier recovery, saddle-point verdicts, and estimator synthesis.
//!
//! Given the linear observation model y = Hx + w and an ambiguity set of
//! Gaussian distributions around nominal laws for x and w, this module
//! answers the three questions the toolkit exists for:
//!
//! 1. [`solve_maxmin`] computes the best MSE any affine estimator can
//!    guarantee against the least-favorable covariance pair inside the
//!    ambiguity set (the adversary commits first).
//! 2. [`solve_minmax`] synthesizes the robust affine estimator whose
//!    worst case over the ambiguity set is smallest (the estimator commits
//!    first), together with the least-favorable Gaussian pair attaining it.
//! 3. [`check_saddle_nsc`] / [`check_saddle_sufficient`] decide whether the
//!    two orders of play coincide, i.e. whether a saddle point exists, via
//!    an exact negative-semidefiniteness certificate and a cheap radius
//!    product test respectively.
//!
//! [`worst_case_mse`] evaluates any fixed affine estimator against the
//! ambiguity set, which both closes the ordering chain between the two
//! values above and exposes the least-favorable distribution for a given
//! design.
//!
//! All solves are dense, deterministic, and f64-only; they go through the
//! in-crate interior-point solver in [`crate::sdp`].

mod maxmin;
mod minmax;
mod multiplier;
mod rank_one;
mod worst_case;

pub use maxmin::{
    build_maxmin_sdp, check_saddle_nsc, check_saddle_nsc_with_tol, check_saddle_sufficient,
    solve_maxmin, solve_maxmin_with, MaxminSolution, NscVerdict, SaddleCertificate,
};
pub use minmax::{build_minmax_sdp, solve_minmax, solve_minmax_with, RobustSynthesis};
pub use multiplier::{covariance_from_multiplier, recover_multiplier};
pub use rank_one::rank_one_reduce;
pub use worst_case::{worst_case_mse, worst_case_mse_with, WorstCase};

use crate::model::{AmbiguitySpec, ModelError, ObservationModel};
use crate::sdp::{SolveOptions, SolveStatus};
use crate::{Mat, SymMatrix};
use serde::Serialize;
use thiserror::Error;

/// Failure modes of the robust-estimation layer.
#[derive(Debug, Error)]
pub enum WdreError {
    /// Inconsistent dimensions between an ambiguity spec and a model.
    #[error(transparent)]
    Model(#[from] ModelError),
    /// The interior-point solver did not return a usable optimum.
    #[error("SDP solver failed while {context}: status {status}")]
    SolverFailed {
        status: SolveStatus,
        context: &'static str,
    },
    /// An operation needs strictly positive definite nominal covariances.
    #[error("nominal covariances must be positive definite: {context}")]
    AssumptionViolated { context: &'static str },
    /// The rank-one extraction could not certify its output.
    #[error("rank-one reduction failed: {detail}")]
    RankReductionFailed { detail: String },
    /// The multiplier equation has no root in the search bracket.
    #[error("no multiplier root found: {detail}")]
    NoRoot { detail: String },
}

fn ensure_consistent(
    spec: &AmbiguitySpec<f64>,
    model: &ObservationModel<f64>,
) -> Result<(), WdreError> {
    if spec.nominal_x.dim() != model.state_dim() {
        return Err(ModelError::DimensionMismatch {
            context: "ambiguity spec vs observation model",
            expected: format!("state dimension {}", model.state_dim()),
            found: format!("nominal x dimension {}", spec.nominal_x.dim()),
        }
        .into());
    }
    if spec.nominal_w.dim() != model.obs_dim() {
        return Err(ModelError::DimensionMismatch {
            context: "ambiguity spec vs observation model",
            expected: format!("observation dimension {}", model.obs_dim()),
            found: format!("nominal w dimension {}", spec.nominal_w.dim()),
        }
        .into());
    }
    Ok(())
}

/// Squared Gelbrich distance between two covariance matrices (zero means).
fn cov_gelbrich_sq(
    a: &crate::SymMatrix,
    b: &crate::SymMatrix,
) -> Result<f64, WdreError> {
    use crate::model::{gelbrich_distance, GaussianSpec};
    let ga = GaussianSpec::centered(a.clone())?;
    let gb = GaussianSpec::centered(b.clone())?;
    let d = gelbrich_distance(&ga, &gb)?;
    Ok(d * d)
}

/// Diagonal indicator: ones on positions `lo..hi`, zero elsewhere. Reads
/// one sub-vector's second moment out of a stacked moment block.
fn diag_indicator(dim: usize, lo: usize, hi: usize) -> SymMatrix {
    SymMatrix::from_fn_upper(dim, |i, j| {
        if i == j && i >= lo && i < hi {
            1.0
        } else {
            0.0
        }
    })
}

/// Whether the mean-movement energy read off an optimal moment block is
/// below the solver's resolution. Budget traces this small relative to the
/// squared radii are indistinguishable from zero, and factoring such a
/// block would only amplify rounding noise into spurious means.
fn mean_movement_is_noise(usage_x: f64, usage_w: f64, rho_x: f64, rho_w: f64) -> bool {
    usage_x <= 1e-6 * (1.0 + rho_x * rho_x) && usage_w <= 1e-6 * (1.0 + rho_w * rho_w)
}

/// Error gain `D = [K, -A]` mapping stacked mean movement `(mu_x; mu_w)`
/// to estimation bias.
fn error_gain(k: &Mat, a: &Mat) -> Mat {
    let n = k.nrows();
    Mat::from_fn(n, n + a.ncols(), |i, j| {
        if j < n {
            k[(i, j)]
        } else {
            -a[(i, j - n)]
        }
    })
}

/// Gram matrix `D^T D`.
fn gram(d: &Mat) -> SymMatrix {
    let cols: Vec<Vec<f64>> = (0..d.ncols()).map(|j| d.col(j)).collect();
    SymMatrix::from_fn_upper(d.ncols(), |i, j| crate::linalg::dot(&cols[i], &cols[j]))
}

/// One-stop summary of both solves and both saddle verdicts for an
/// instance, in the shape emitted by the command-line front end.
///
/// `saddle_exists` and `sufficient_holds` are `None` when the nominal
/// covariances are only positive semidefinite, where neither verdict is
/// backed by the theory.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub value_maxmin: f64,
    pub value_minmax: f64,
    pub gamma_x: f64,
    pub gamma_w: f64,
    pub nsc_margin: f64,
    pub saddle_exists: Option<bool>,
    pub sufficient_holds: Option<bool>,
    /// Gain of the robust estimator (the minmax solution).
    #[serde(rename = "A")]
    pub a: Mat,
    /// Offset of the robust estimator.
    pub b: Vec<f64>,
    pub lf_means: LfMeans,
    pub lf_covs: LfCovs,
}

/// Means of the least-favorable Gaussian pair.
#[derive(Debug, Clone, Serialize)]
pub struct LfMeans {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

/// Covariances of the least-favorable Gaussian pair.
#[derive(Debug, Clone, Serialize)]
pub struct LfCovs {
    pub x: crate::SymMatrix,
    pub w: crate::SymMatrix,
}

/// Runs both solves and both saddle checks on one instance.
///
/// `tol_psd` overrides the scaled default used by the NSD verdict;
/// `opts` tunes the underlying SDP solves.
pub fn certificate_report(
    spec: &AmbiguitySpec<f64>,
    model: &ObservationModel<f64>,
    tol_psd: Option<f64>,
    opts: &SolveOptions,
) -> Result<CertificateReport, WdreError> {
    let maxmin = solve_maxmin_with(spec, model, opts)?;
    let minmax = solve_minmax_with(spec, model, opts)?;
    let (saddle_exists, sufficient_holds) = if spec.positive_definite_nominals() {
        let verdict = check_saddle_nsc_with_tol(&maxmin.certificate, tol_psd)?;
        let sufficient = check_saddle_sufficient(spec)?;
        (Some(verdict.exists), Some(sufficient))
    } else {
        (None, None)
    };
    Ok(CertificateReport {
        value_maxmin: maxmin.value,
        value_minmax: minmax.value,
        gamma_x: maxmin.certificate.gamma_x_star,
        gamma_w: maxmin.certificate.gamma_w_star,
        nsc_margin: maxmin.certificate.nsc_margin,
        saddle_exists,
        sufficient_holds,
        a: minmax.estimator.a.clone(),
        b: minmax.estimator.b.clone(),
        lf_means: LfMeans {
            x: minmax.lf_x.mean().to_vec(),
            w: minmax.lf_w.mean().to_vec(),
        },
        lf_covs: LfCovs {
            x: minmax.lf_x.cov().clone(),
            w: minmax.lf_w.cov().clone(),
        },
    })
}
