//! Estimator-first solve: the robust affine estimator and the
//! least-favorable Gaussian pair attaining its worst case.
//!
//! The program maximizes the worst-case MSE jointly over covariances in
//! the Gelbrich balls and mean movement, with the mean second moments
//! relaxed into a PSD block `S`; the estimator itself is read off the dual
//! of the coupling LMI. With `W = blkdiag(Sigma_x, Sigma_w) + S` and
//! `L = [[I, 0], [H, I]]`, the value is
//!
//! `max tr((L W L^T)_11) - min { tr(U) : [[U, M_12], [M_21, M_22]] >= 0 }`
//!
//! where `M = L W L^T`. The epigraph block `U` absorbs the Schur
//! complement exactly as in the adversary-first program, so no free
//! (sign-indefinite) matrix variable is needed.

use super::maxmin::{add_gelbrich_ball, entry_coeff};
use super::{
    diag_indicator, ensure_consistent, error_gain, gram, mean_movement_is_noise,
    rank_one_reduce, WdreError,
};
use crate::model::{AffineEstimator, AmbiguitySpec, GaussianSpec, ObservationModel};
use crate::sdp::{
    solve_sdp, trace_coeff, BlockId, Coeff, LmiBuilder, SdpProblem, SolveOptions, SolveStatus,
};
use crate::{Mat, SymMatrix};

struct MinmaxIds {
    s: BlockId,
    sigma_x: BlockId,
    sigma_w: BlockId,
}

fn build_minmax(
    spec: &AmbiguitySpec<f64>,
    model: &ObservationModel<f64>,
) -> Result<(SdpProblem, MinmaxIds), WdreError> {
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
    let e_x = diag_indicator(n + m, 0, n);
    let e_w = diag_indicator(n + m, n, n + m);

    let mut prob = SdpProblem::new();
    let s = prob.add_psd_block(n + m);
    let sigma_x = add_gelbrich_ball(
        &mut prob,
        "gelbrich_x",
        "wass_x",
        &sqrt_x,
        spec.rho_x,
        vec![(s, Coeff::Psd(e_x.clone()))],
    );
    let sigma_w = add_gelbrich_ball(
        &mut prob,
        "gelbrich_w",
        "wass_w",
        &sqrt_w,
        spec.rho_w,
        vec![(s, Coeff::Psd(e_w))],
    );
    let u = prob.add_psd_block(n);

    // tr(M_11) = tr(Sigma_x) + tr(S_11).
    prob.set_objective(sigma_x, trace_coeff(n, 1.0));
    prob.set_objective(s, Coeff::Psd(e_x));
    prob.set_objective(u, trace_coeff(n, -1.0));

    // Rows of L: e_i for the signal part, (h_k; e_k) for the observation
    // part. M_ij = l_i^T (blkdiag(Sigma_x, Sigma_w) + S) l_j.
    let mut l_rows: Vec<Vec<f64>> = Vec::with_capacity(n + m);
    for i in 0..n {
        let mut r = vec![0.0; n + m];
        r[i] = 1.0;
        l_rows.push(r);
    }
    for k in 0..m {
        let mut r = vec![0.0; n + m];
        r[..n].copy_from_slice(model.h().row(k));
        r[n + k] = 1.0;
        l_rows.push(r);
    }

    let mut big = LmiBuilder::new(n + m);
    for i in 0..n {
        for j in i..n {
            big.term(i, j, u, entry_coeff(n, i, j));
        }
    }
    for i in 0..n {
        let mut e_i = vec![0.0; n];
        e_i[i] = 1.0;
        for k in 0..m {
            let on_sigma = SymMatrix::sym_outer(&e_i, model.h().row(k));
            big.term(i, n + k, sigma_x, Coeff::Psd(on_sigma));
            let on_s = SymMatrix::sym_outer(&l_rows[i], &l_rows[n + k]);
            big.term(i, n + k, s, Coeff::Psd(on_s));
        }
    }
    for k in 0..m {
        for l in k..m {
            let on_sigma = SymMatrix::sym_outer(model.h().row(k), model.h().row(l));
            big.term(n + k, n + l, sigma_x, Coeff::Psd(on_sigma));
            big.term(n + k, n + l, sigma_w, entry_coeff(m, k, l));
            let on_s = SymMatrix::sym_outer(&l_rows[n + k], &l_rows[n + l]);
            big.term(n + k, n + l, s, Coeff::Psd(on_s));
        }
    }
    prob.add_lmi_group("big_lmi", big);

    Ok((
        prob,
        MinmaxIds { s, sigma_x, sigma_w },
    ))
}

/// Builds the estimator-first SDP: blocks `S`, `Sigma_x`, `V_x`,
/// `Sigma_w`, `V_w`, `U`; objective `max tr(Sigma_x) + tr(S_11) - tr(U)`;
/// Gelbrich-ball groups whose trace rows (labels `"wass_x"`, `"wass_w"`)
/// also charge the mean second moments; and the coupling LMI labeled
/// `"big_lmi"` whose dual carries the robust estimator.
pub fn build_minmax_sdp(
    spec: &AmbiguitySpec<f64>,
    model: &ObservationModel<f64>,
) -> Result<SdpProblem, WdreError> {
    Ok(build_minmax(spec, model)?.0)
}

/// Result of [`solve_minmax`]: the robust estimator and the
/// least-favorable pair it is in equilibrium with.
#[derive(Debug, Clone)]
pub struct RobustSynthesis {
    /// The estimator minimizing worst-case MSE over the ambiguity set.
    pub estimator: AffineEstimator<f64>,
    /// Its worst-case MSE (the minmax value).
    pub value: f64,
    /// Least-favorable signal distribution.
    pub lf_x: GaussianSpec<f64>,
    /// Least-favorable noise distribution.
    pub lf_w: GaussianSpec<f64>,
    /// Optimal mean-moment block; its extracted rank-one factor carries
    /// the least-favorable mean movement.
    pub s_star: SymMatrix,
    /// Dual matrix of the coupling LMI; the estimator gain is the negated
    /// upper-right block.
    pub w_dual: SymMatrix,
}

/// Solves the estimator-first program with default solver options.
pub fn solve_minmax(
    spec: &AmbiguitySpec<f64>,
    model: &ObservationModel<f64>,
) -> Result<RobustSynthesis, WdreError> {
    solve_minmax_with(spec, model, &SolveOptions::default())
}

/// Solves the estimator-first program and synthesizes the robust
/// estimator.
///
/// The gain is `A* = -W_12` from the dual of the coupling LMI, the offset
/// keeps the estimate unbiased at the nominal means (mean movement never
/// helps the adversary once the offset is optimal), and the
/// least-favorable means come from a certified rank-one reduction of the
/// mean-moment block.
pub fn solve_minmax_with(
    spec: &AmbiguitySpec<f64>,
    model: &ObservationModel<f64>,
    opts: &SolveOptions,
) -> Result<RobustSynthesis, WdreError> {
    let (prob, ids) = build_minmax(spec, model)?;
    let sol = solve_sdp(&prob, opts);
    if sol.status != SolveStatus::Optimal {
        return Err(WdreError::SolverFailed {
            status: sol.status,
            context: "solving the estimator-first SDP",
        });
    }
    let n = model.state_dim();
    let m = model.obs_dim();
    let w_dual = sol
        .dual_matrix("big_lmi")
        .expect("labeled LMI group must expose a dual matrix")
        .clone();
    let a_star = w_dual.block(0, n, n, m).scaled(-1.0);

    let h_mu_x = model.h().matvec(spec.nominal_x.mean());
    let a_h_mu_x = a_star.matvec(&h_mu_x);
    let a_mu_w = a_star.matvec(spec.nominal_w.mean());
    let b: Vec<f64> = (0..n)
        .map(|i| spec.nominal_x.mean()[i] - a_h_mu_x[i] - a_mu_w[i])
        .collect();
    let k_star = Mat::identity(n).sub(&a_star.matmul(model.h()));
    let estimator = AffineEstimator::new(a_star, b)?;

    let s_star = sol.psd_block(ids.s).clone();
    let sigma_x_star = sol.psd_block(ids.sigma_x).clone();
    let sigma_w_star = sol.psd_block(ids.sigma_w).clone();

    // At the optimum, S* maximizes the mean contribution
    // |K* mu_x - A* mu_w|^2 = <D^T D, S> with D = [K*, -A*] under the two
    // budget rows as used, so the reduction below certifies an exact
    // rank-one mean pair.
    let dtd = gram(&error_gain(&k_star, &estimator.a));
    let e_x = diag_indicator(n + m, 0, n);
    let e_w = diag_indicator(n + m, n, n + m);
    let usage_x = e_x.inner(&s_star);
    let usage_w = e_w.inner(&s_star);
    let mu = if mean_movement_is_noise(usage_x, usage_w, spec.rho_x, spec.rho_w) {
        vec![0.0; n + m]
    } else {
        rank_one_reduce(&s_star, &dtd, &e_x, &e_w, usage_x, usage_w)?
    };

    let lf_x_mean: Vec<f64> = (0..n)
        .map(|i| spec.nominal_x.mean()[i] + mu[i])
        .collect();
    let lf_w_mean: Vec<f64> = (0..m)
        .map(|k| spec.nominal_w.mean()[k] + mu[n + k])
        .collect();
    let lf_x = GaussianSpec::new(lf_x_mean, sigma_x_star)?;
    let lf_w = GaussianSpec::new(lf_w_mean, sigma_w_star)?;

    Ok(RobustSynthesis {
        estimator,
        value: sol.primal_value,
        lf_x,
        lf_w,
        s_star,
        w_dual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::gelbrich_distance;

    fn scalar_instance(rho: f64) -> (AmbiguitySpec<f64>, ObservationModel<f64>) {
        let g = GaussianSpec::centered(SymMatrix::identity(1)).unwrap();
        let spec = AmbiguitySpec::new(g.clone(), g, rho, rho).unwrap();
        let model = ObservationModel::new(Mat::identity(1));
        (spec, model)
    }

    #[test]
    fn counterexample_synthesis_and_least_favorable_pair() {
        let (spec, model) = scalar_instance(2.0);
        let syn = solve_minmax(&spec, &model).unwrap();
        assert!((syn.value - 5.0).abs() < 1e-5, "value {}", syn.value);
        assert!((syn.estimator.a[(0, 0)] - 0.5).abs() < 1e-4);
        assert!(syn.estimator.b[0].abs() < 1e-6);
        assert!((syn.lf_x.mean()[0] - 3.0f64.sqrt()).abs() < 1e-3);
        assert!((syn.lf_w.mean()[0] + 3.0f64.sqrt()).abs() < 1e-3);
        assert!((syn.lf_x.cov().get(0, 0) - 4.0).abs() < 1e-3);
        assert!((syn.lf_w.cov().get(0, 0) - 4.0).abs() < 1e-3);
        assert!((syn.s_star.get(0, 0) - 3.0).abs() < 1e-3);
        assert!((syn.s_star.get(0, 1) + 3.0).abs() < 1e-3);
        assert_eq!(syn.w_dual.dim(), 2);
        for (lf, nominal, rho) in [
            (&syn.lf_x, &spec.nominal_x, spec.rho_x),
            (&syn.lf_w, &spec.nominal_w, spec.rho_w),
        ] {
            let d = gelbrich_distance(lf, nominal).unwrap();
            assert!(d <= rho + 1e-6, "distance {d} exceeds radius {rho}");
        }
    }

    #[test]
    fn saddle_case_reproduces_the_maxmin_solution() {
        let (spec, model) = scalar_instance(0.5);
        let syn = solve_minmax(&spec, &model).unwrap();
        assert!((syn.value - 1.125).abs() < 1e-5, "value {}", syn.value);
        assert!((syn.estimator.a[(0, 0)] - 0.5).abs() < 1e-4);
        assert!(syn.lf_x.mean()[0].abs() < 1e-3);
        assert!(syn.lf_w.mean()[0].abs() < 1e-3);
        assert!((syn.lf_x.cov().get(0, 0) - 2.25).abs() < 1e-4);
        assert!((syn.lf_w.cov().get(0, 0) - 2.25).abs() < 1e-4);
    }

    #[test]
    fn uninformative_observation_turns_the_estimator_off() {
        let g = GaussianSpec::centered(SymMatrix::identity(1)).unwrap();
        let spec = AmbiguitySpec::new(g.clone(), g, 2.0, 1.0).unwrap();
        let model = ObservationModel::new(Mat::zeros(1, 1));
        let syn = solve_minmax(&spec, &model).unwrap();
        assert!((syn.value - 9.0).abs() < 1e-4, "value {}", syn.value);
        assert!(syn.estimator.a[(0, 0)].abs() < 1e-5);
        assert!(syn.lf_x.mean()[0].abs() < 1e-3);
        assert!((syn.lf_x.cov().get(0, 0) - 9.0).abs() < 1e-4);
    }
}
