//! Adversary-first solve and the saddle-point tests built on its output.
//!
//! The program maximizes, over covariance pairs in the two Gelbrich balls,
//! the minimum MSE achievable by any affine estimator:
//!
//! `tr(Sigma_x) - tr(Sigma_x H^T (H Sigma_x H^T + Sigma_w)^+ H Sigma_x)`.
//!
//! The inverse is linearized by an epigraph block `U` through a Schur
//! complement, so the whole thing is one SDP. Its primal blocks seed the
//! estimator, the trace fixed-point equation gives the multipliers
//! `gamma_x`, `gamma_w`, the closed-form inner argmax at those multipliers
//! gives the least-favorable covariances, and together they assemble the
//! block matrix whose negative semidefiniteness is exactly saddle-point
//! existence.

use serde::Serialize;

use super::{
    cov_gelbrich_sq, covariance_from_multiplier, ensure_consistent, recover_multiplier, WdreError,
};
use crate::model::{
    mse_affine, optimal_affine_estimator, AffineEstimator, AmbiguitySpec, GaussianSpec,
    ObservationModel,
};
use crate::sdp::{
    solve_sdp, trace_coeff, BlockId, Coeff, LmiBuilder, SdpProblem, SdpSolution, Sense,
    SolveOptions, SolveStatus,
};
use crate::{Mat, SymMatrix};

/// Coefficient picking out entry `(i, j)`: `<entry_coeff(d,i,j), X> = X_ij`
/// for symmetric `X`.
pub(super) fn entry_coeff(dim: usize, i: usize, j: usize) -> Coeff {
    let mut c = SymMatrix::zeros(dim);
    c.set(i, j, if i == j { 1.0 } else { 0.5 });
    Coeff::Psd(c)
}

/// Adds a covariance block `Sigma` constrained to the Gelbrich ball of
/// radius `rho` around the nominal whose PSD square root is `sqrt_hat`,
/// returning its block id.
///
/// The ball `tr(Sigma + SigmaHat) - 2 tr[(SigmaHat^{1/2} Sigma
/// SigmaHat^{1/2})^{1/2}] <= rho^2` is written with an auxiliary block `V`:
///
/// ```text
/// [ SigmaHat^{1/2} Sigma SigmaHat^{1/2}   V ]
/// [ V                                     I ]  >= 0,
/// tr(Sigma) - 2 tr(V) <= rho^2 - tr(SigmaHat)      (labeled `trace_label`)
/// ```
///
/// which is exact because `max { tr V : V V^T <= B }` equals `tr(B^{1/2})`.
/// Keeping `V` in the PSD cone loses nothing: the maximizing `V = B^{1/2}`
/// is itself PSD.
///
/// `extra_trace_terms` join the left side of the trace row; the programs
/// whose budgets also pay for mean movement put the mean-moment block
/// there.
pub(super) fn add_gelbrich_ball(
    prob: &mut SdpProblem,
    lmi_label: &str,
    trace_label: &str,
    sqrt_hat: &SymMatrix,
    rho: f64,
    extra_trace_terms: Vec<(BlockId, Coeff)>,
) -> BlockId {
    let n = sqrt_hat.dim();
    let sigma = prob.add_psd_block(n);
    let v = prob.add_psd_block(n);

    let mut lmi = LmiBuilder::new(2 * n);
    for i in 0..n {
        let s_i = sqrt_hat.as_mat().col(i);
        for j in i..n {
            let s_j = sqrt_hat.as_mat().col(j);
            lmi.term(i, j, sigma, Coeff::Psd(SymMatrix::sym_outer(&s_i, &s_j)));
        }
    }
    for i in 0..n {
        for j in 0..n {
            lmi.term(i, n + j, v, entry_coeff(n, i, j));
        }
    }
    for i in 0..n {
        lmi.constant(n + i, n + i, 1.0);
    }
    prob.add_lmi_group(lmi_label, lmi);

    let trace_hat = sqrt_hat.inner(sqrt_hat);
    let mut terms = vec![(sigma, trace_coeff(n, 1.0)), (v, trace_coeff(n, -2.0))];
    terms.extend(extra_trace_terms);
    prob.add_constraint(Some(trace_label), terms, Sense::Le, rho * rho - trace_hat);
    sigma
}

struct MaxminIds {
    sigma_x: BlockId,
    sigma_w: BlockId,
}

fn build_maxmin(
    spec: &AmbiguitySpec<f64>,
    model: &ObservationModel<f64>,
) -> Result<(SdpProblem, MaxminIds), WdreError> {
    ensure_consistent(spec, model)?;
    let n = model.state_dim();
    let m = model.obs_dim();
    let sqrt_x = spec
        .nominal_x
        .cov()
        .psd_sqrt()
        .expect("validated covariance must admit a psd square root");
    let sqrt_w = spec
        .nominal_w
        .cov()
        .psd_sqrt()
        .expect("validated covariance must admit a psd square root");

    let mut prob = SdpProblem::new();
    let sigma_x = add_gelbrich_ball(&mut prob, "gelbrich_x", "wass_x", &sqrt_x, spec.rho_x, vec![]);
    let sigma_w = add_gelbrich_ball(&mut prob, "gelbrich_w", "wass_w", &sqrt_w, spec.rho_w, vec![]);
    let u = prob.add_psd_block(n);

    prob.set_objective(sigma_x, trace_coeff(n, 1.0));
    prob.set_objective(u, trace_coeff(n, -1.0));

    // [[U, Sigma_x H^T], [H Sigma_x, H Sigma_x H^T + Sigma_w]] >= 0 forces
    // U >= Sigma_x H^T (H Sigma_x H^T + Sigma_w)^+ H Sigma_x, so minimizing
    // tr(U) recovers the subtracted term of the MMSE.
    let mut schur = LmiBuilder::new(n + m);
    for i in 0..n {
        for j in i..n {
            schur.term(i, j, u, entry_coeff(n, i, j));
        }
    }
    for i in 0..n {
        let mut e_i = vec![0.0; n];
        e_i[i] = 1.0;
        for k in 0..m {
            let coeff = SymMatrix::sym_outer(&e_i, model.h().row(k));
            schur.term(i, n + k, sigma_x, Coeff::Psd(coeff));
        }
    }
    for k in 0..m {
        for l in k..m {
            let coeff = SymMatrix::sym_outer(model.h().row(k), model.h().row(l));
            schur.term(n + k, n + l, sigma_x, Coeff::Psd(coeff));
            schur.term(n + k, n + l, sigma_w, entry_coeff(m, k, l));
        }
    }
    prob.add_lmi_group("schur", schur);

    Ok((
        prob,
        MaxminIds { sigma_x, sigma_w },
    ))
}

/// Builds the adversary-first SDP: blocks `Sigma_x`, `Sigma_w`, `V_x`,
/// `V_w`, `U`; objective `max tr(Sigma_x) - tr(U)`; two Gelbrich-ball
/// groups with trace rows labeled `"wass_x"` and `"wass_w"`; and the Schur
/// LMI labeled `"schur"` tying `U` to the covariance pair.
pub fn build_maxmin_sdp(
    spec: &AmbiguitySpec<f64>,
    model: &ObservationModel<f64>,
) -> Result<SdpProblem, WdreError> {
    Ok(build_maxmin(spec, model)?.0)
}

/// Primal/dual data of an adversary-first solve, in the form the
/// saddle-point test consumes.
#[derive(Debug, Clone, Serialize)]
pub struct SaddleCertificate {
    /// Least-favorable signal covariance.
    pub sigma_x_star: SymMatrix,
    /// Least-favorable noise covariance.
    pub sigma_w_star: SymMatrix,
    /// Multiplier of the signal-side Wasserstein budget.
    pub gamma_x_star: f64,
    /// Multiplier of the noise-side Wasserstein budget.
    pub gamma_w_star: f64,
    /// Gain of the estimator answering the least-favorable pair.
    #[serde(rename = "A_star")]
    pub a_star: Mat,
    /// `I - A_star H`, the estimation-error gain on the signal.
    #[serde(rename = "K_star")]
    pub k_star: Mat,
    /// The block matrix whose negative semidefiniteness is equivalent to
    /// saddle-point existence:
    /// `[[K*^T K* - gamma_x I, K*^T A*], [A*^T K*, A*^T A* - gamma_w I]]`.
    pub nsc_matrix: SymMatrix,
    /// Largest eigenvalue of `nsc_matrix`; nonpositive means saddle.
    pub nsc_margin: f64,
    /// Whether the nominal covariances are strictly positive definite; the
    /// exact test is only backed by the theory when they are.
    pub nominals_positive_definite: bool,
}

/// Result of [`solve_maxmin`].
#[derive(Debug, Clone)]
pub struct MaxminSolution {
    /// Saddle-point certificate assembled from the primal/dual pair.
    pub certificate: SaddleCertificate,
    /// Optimal value: the best MSE guarantee available when the adversary
    /// commits to a distribution pair first.
    pub value: f64,
    /// The affine estimator answering the least-favorable pair, offset
    /// chosen unbiased at the nominal means.
    pub estimator: AffineEstimator<f64>,
    /// Raw solver output backing the certificate.
    pub sdp: SdpSolution,
}

/// Solves the adversary-first program with default solver options.
pub fn solve_maxmin(
    spec: &AmbiguitySpec<f64>,
    model: &ObservationModel<f64>,
) -> Result<MaxminSolution, WdreError> {
    solve_maxmin_with(spec, model, &SolveOptions::default())
}

/// Solves the adversary-first program and assembles the certificate.
///
/// The estimator is the closed-form MMSE response to the primal covariance
/// blocks, the multipliers come from the trace fixed-point equation (with
/// the labeled trace-row duals as fallback), and the published
/// least-favorable covariances are the closed-form inner argmax at those
/// multipliers. Interior-point blocks carry noise of order sqrt(gap) along
/// directions where the objective is flat; the closed form hits the budget
/// exactly and is consistent with `(gamma, K)` to machine precision. Since
/// the estimator's MSE is linear in the covariances with gradient normal to
/// the budget sphere at the optimum, republishing moves the value only at
/// second order, and it is recomputed against the published pair.
pub fn solve_maxmin_with(
    spec: &AmbiguitySpec<f64>,
    model: &ObservationModel<f64>,
    opts: &SolveOptions,
) -> Result<MaxminSolution, WdreError> {
    let (prob, ids) = build_maxmin(spec, model)?;
    let sdp = solve_sdp(&prob, opts);
    if sdp.status != SolveStatus::Optimal {
        return Err(WdreError::SolverFailed {
            status: sdp.status,
            context: "solving the adversary-first SDP",
        });
    }
    let sigma_x_raw = sdp.psd_block(ids.sigma_x).clone();
    let sigma_w_raw = sdp.psd_block(ids.sigma_w).clone();

    let lf_x = GaussianSpec::new(spec.nominal_x.mean().to_vec(), sigma_x_raw.clone())?;
    let lf_w = GaussianSpec::new(spec.nominal_w.mean().to_vec(), sigma_w_raw.clone())?;
    let estimator = optimal_affine_estimator(model, &lf_x, &lf_w)?;
    let n = model.state_dim();
    let k_star = Mat::identity(n).sub(&estimator.a.matmul(model.h()));

    let gamma_x_star = published_multiplier(
        &sdp,
        "wass_x",
        &k_star,
        spec.nominal_x.cov(),
        spec.rho_x,
        &sigma_x_raw,
        sdp.primal_value,
    )?;
    let gamma_w_star = published_multiplier(
        &sdp,
        "wass_w",
        &estimator.a,
        spec.nominal_w.cov(),
        spec.rho_w,
        &sigma_w_raw,
        sdp.primal_value,
    )?;

    let sigma_x_star = covariance_from_multiplier(&k_star, spec.nominal_x.cov(), gamma_x_star)
        .unwrap_or(sigma_x_raw);
    let sigma_w_star = covariance_from_multiplier(&estimator.a, spec.nominal_w.cov(), gamma_w_star)
        .unwrap_or(sigma_w_raw);
    let lf_x = GaussianSpec::new(spec.nominal_x.mean().to_vec(), sigma_x_star.clone())?;
    let lf_w = GaussianSpec::new(spec.nominal_w.mean().to_vec(), sigma_w_star.clone())?;
    let value = mse_affine(&estimator, model, &lf_x, &lf_w)?;

    let nsc_matrix = assemble_nsc(&k_star, &estimator.a, gamma_x_star, gamma_w_star);
    let nsc_margin = nsc_matrix.nsd_margin();
    let certificate = SaddleCertificate {
        sigma_x_star,
        sigma_w_star,
        gamma_x_star,
        gamma_w_star,
        a_star: estimator.a.clone(),
        k_star,
        nsc_matrix,
        nsc_margin,
        nominals_positive_definite: spec.positive_definite_nominals(),
    };
    Ok(MaxminSolution {
        certificate,
        value,
        estimator,
        sdp,
    })
}

/// Multiplier of one Wasserstein budget.
///
/// The root of the trace fixed-point equation is the primary source: it is
/// exact to bisection precision whenever the budget binds, the budget binds
/// whenever the objective depends on this side at all, and in the remaining
/// case the root is 0, matching a slack constraint. The SDP dual of the
/// labeled trace row only serves as fallback when no root is found, and
/// then stands or falls on the complementarity check
/// `|gamma * (rho^2 - gelbrich^2)| <= 1e-6` scaled.
fn published_multiplier(
    sdp: &SdpSolution,
    label: &str,
    kmat: &Mat,
    sigma_hat: &SymMatrix,
    rho: f64,
    sigma_star: &SymMatrix,
    value: f64,
) -> Result<f64, WdreError> {
    match recover_multiplier(kmat, sigma_hat, rho) {
        Ok(root) => Ok(root),
        Err(err) => {
            let dual = sdp.dual_scalar(label).unwrap_or(0.0).max(0.0);
            let slack = rho * rho - cov_gelbrich_sq(sigma_star, sigma_hat)?;
            if (dual * slack).abs() <= 1e-6 * (1.0 + value.abs()) {
                Ok(dual)
            } else {
                Err(err)
            }
        }
    }
}

fn assemble_nsc(k: &Mat, a: &Mat, gamma_x: f64, gamma_w: f64) -> SymMatrix {
    let n = k.nrows();
    let m = a.ncols();
    let ktk = k.transpose().matmul(k);
    let kta = k.transpose().matmul(a);
    let ata = a.transpose().matmul(a);
    SymMatrix::from_fn_upper(n + m, |i, j| {
        if j < n {
            ktk[(i, j)] - if i == j { gamma_x } else { 0.0 }
        } else if i < n {
            kta[(i, j - n)]
        } else {
            ata[(i - n, j - n)] - if i == j { gamma_w } else { 0.0 }
        }
    })
}

/// Verdict of the exact saddle-point test.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NscVerdict {
    /// Whether the test matrix is negative semidefinite within tolerance.
    pub exists: bool,
    /// Largest eigenvalue of the test matrix; how far the certificate is
    /// from (or inside) the saddle region.
    pub margin: f64,
}

/// Exact saddle-point test with the default tolerance
/// `1e-7 * (1 + frobenius_norm(nsc_matrix))`.
///
/// A saddle point exists if and only if the certificate's block matrix is
/// negative semidefinite. Requires strictly positive definite nominal
/// covariances; otherwise the verdict is indeterminate and an
/// `AssumptionViolated` error is returned.
pub fn check_saddle_nsc(cert: &SaddleCertificate) -> Result<NscVerdict, WdreError> {
    check_saddle_nsc_with_tol(cert, None)
}

/// Exact saddle-point test with an explicit eigenvalue tolerance.
pub fn check_saddle_nsc_with_tol(
    cert: &SaddleCertificate,
    tol_psd: Option<f64>,
) -> Result<NscVerdict, WdreError> {
    if !cert.nominals_positive_definite {
        return Err(WdreError::AssumptionViolated {
            context: "the exact saddle test needs positive definite nominal covariances",
        });
    }
    let tol = tol_psd.unwrap_or_else(|| 1e-7 * (1.0 + cert.nsc_matrix.frobenius_norm()));
    Ok(NscVerdict {
        exists: cert.nsc_margin <= tol,
        margin: cert.nsc_margin,
    })
}

/// Cheap sufficient condition for saddle-point existence:
/// `rho_x * rho_w <= sqrt(lambda_min(SigmaHat_x) * lambda_min(SigmaHat_w))`
/// (boundary included).
///
/// `true` guarantees a saddle point; `false` is inconclusive in general,
/// though exact for scalar instances. Requires strictly positive definite
/// nominal covariances.
pub fn check_saddle_sufficient(spec: &AmbiguitySpec<f64>) -> Result<bool, WdreError> {
    if !spec.positive_definite_nominals() {
        return Err(WdreError::AssumptionViolated {
            context: "the radius-product test needs positive definite nominal covariances",
        });
    }
    let lx = spec.nominal_x.cov().lambda_min().max(0.0);
    let lw = spec.nominal_w.cov().lambda_min().max(0.0);
    Ok(spec.rho_x * spec.rho_w <= lx.sqrt() * lw.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AmbiguitySpec;

    fn scalar_instance(rho: f64) -> (AmbiguitySpec<f64>, ObservationModel<f64>) {
        let g = GaussianSpec::centered(SymMatrix::identity(1)).unwrap();
        let spec = AmbiguitySpec::new(g.clone(), g, rho, rho).unwrap();
        let model = ObservationModel::new(Mat::identity(1));
        (spec, model)
    }

    #[test]
    fn counterexample_matches_printed_quantities() {
        let (spec, model) = scalar_instance(2.0);
        let sol = solve_maxmin(&spec, &model).unwrap();
        assert!((sol.value - 4.5).abs() < 1e-5, "value {}", sol.value);
        let cert = &sol.certificate;
        assert!((cert.sigma_x_star.get(0, 0) - 9.0).abs() < 1e-4);
        assert!((cert.sigma_w_star.get(0, 0) - 9.0).abs() < 1e-4);
        assert!((cert.a_star[(0, 0)] - 0.5).abs() < 1e-5);
        assert!((cert.k_star[(0, 0)] - 0.5).abs() < 1e-5);
        assert!((cert.gamma_x_star - 0.375).abs() < 1e-4);
        assert!((cert.gamma_w_star - 0.375).abs() < 1e-4);
        assert!((cert.nsc_margin - 0.125).abs() < 1e-4);
        let verdict = check_saddle_nsc(cert).unwrap();
        assert!(!verdict.exists);
        assert!(!check_saddle_sufficient(&spec).unwrap());
    }

    #[test]
    fn small_radius_scalar_instance_has_saddle() {
        let (spec, model) = scalar_instance(0.5);
        let sol = solve_maxmin(&spec, &model).unwrap();
        assert!((sol.value - 1.125).abs() < 1e-5, "value {}", sol.value);
        let cert = &sol.certificate;
        assert!((cert.sigma_x_star.get(0, 0) - 2.25).abs() < 1e-4);
        // The raw trace duals carry a few 1e-4 of solver noise here; the
        // published multiplier is the fixed-point root and much tighter.
        let raw_dual = sol.sdp.dual_scalar("wass_x").unwrap();
        assert!((raw_dual - 0.75).abs() < 1e-3, "raw dual {raw_dual}");
        assert!((cert.gamma_x_star - 0.75).abs() < 1e-6);
        assert!((cert.gamma_w_star - 0.75).abs() < 1e-6);
        assert!((cert.nsc_margin + 0.25).abs() < 1e-4);
        assert!(check_saddle_nsc(cert).unwrap().exists);
        assert!(check_saddle_sufficient(&spec).unwrap());
    }

    #[test]
    fn sufficient_test_includes_the_boundary() {
        let gx = GaussianSpec::centered(SymMatrix::identity(1)).unwrap();
        let gw = GaussianSpec::centered(SymMatrix::identity(1)).unwrap();
        let spec = AmbiguitySpec::new(gx, gw, 2.0, 0.5).unwrap();
        assert!(check_saddle_sufficient(&spec).unwrap());
    }

    #[test]
    fn semidefinite_nominals_make_the_verdict_indeterminate() {
        let gx = GaussianSpec::centered(SymMatrix::diag(&[1.0, 0.0])).unwrap();
        let gw = GaussianSpec::centered(SymMatrix::identity(2)).unwrap();
        let spec = AmbiguitySpec::new(gx, gw, 0.5, 0.5).unwrap();
        let model = ObservationModel::new(Mat::identity(2));
        let sol = solve_maxmin(&spec, &model).unwrap();
        assert!(!sol.certificate.nominals_positive_definite);
        assert!(matches!(
            check_saddle_nsc(&sol.certificate),
            Err(WdreError::AssumptionViolated { .. })
        ));
        assert!(matches!(
            check_saddle_sufficient(&spec),
            Err(WdreError::AssumptionViolated { .. })
        ));
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let g = GaussianSpec::centered(SymMatrix::identity(2)).unwrap();
        let spec = AmbiguitySpec::new(g.clone(), g, 1.0, 1.0).unwrap();
        let model = ObservationModel::new(Mat::identity(1));
        assert!(build_maxmin_sdp(&spec, &model).is_err());
    }
}
