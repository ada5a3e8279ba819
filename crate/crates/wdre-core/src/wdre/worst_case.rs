//! Worst-case MSE of a fixed affine estimator over the ambiguity set.
//!
//! With `K = I - AH` and the estimator's residual offset
//! `b_res = -K mu_x + A mu_w + b`, the MSE at moved moments splits into
//!
//! `<K^T K, Sigma_x> + <A^T A, Sigma_w> + |K mu~_x - A mu~_w - b_res|^2`,
//!
//! where `mu~` is the mean movement relative to the nominals. The mean
//! second moments are relaxed into a PSD block that shares each ball's
//! budget with the covariance movement; the relaxation admits a rank-one
//! optimum, so the extracted pair attains the supremum.

use super::maxmin::{add_gelbrich_ball, entry_coeff};
use super::{
    diag_indicator, ensure_consistent, error_gain, gram, mean_movement_is_noise,
    rank_one_reduce, WdreError,
};
use crate::linalg::norm2;
use crate::model::{
    AffineEstimator, AmbiguitySpec, GaussianSpec, ModelError, ObservationModel,
};
use crate::sdp::{solve_sdp, Coeff, SdpProblem, Sense, SolveOptions, SolveStatus};
use crate::Mat;

/// Result of [`worst_case_mse`]: the supremum and a Gaussian pair
/// attaining it.
#[derive(Debug, Clone)]
pub struct WorstCase {
    /// Worst-case MSE of the estimator over the ambiguity set.
    pub value: f64,
    /// Least-favorable signal distribution for this estimator.
    pub argmax_x: GaussianSpec<f64>,
    /// Least-favorable noise distribution for this estimator.
    pub argmax_w: GaussianSpec<f64>,
}

/// Worst-case MSE with default solver options.
pub fn worst_case_mse(
    f: &AffineEstimator<f64>,
    spec: &AmbiguitySpec<f64>,
    model: &ObservationModel<f64>,
) -> Result<WorstCase, WdreError> {
    worst_case_mse_with(f, spec, model, &SolveOptions::default())
}

/// Evaluates `sup mse(f, P)` over the ambiguity set.
///
/// When the estimator is unbiased at the nominal means the mean block
/// stays homogeneous and the attaining means come from a certified
/// rank-one reduction; otherwise the block is lifted by one dimension with
/// a unit corner pinning the offset, and the means are read from its last
/// column. The returned value is never below the nominal MSE of `f`
/// (the nominal pair is feasible).
pub fn worst_case_mse_with(
    f: &AffineEstimator<f64>,
    spec: &AmbiguitySpec<f64>,
    model: &ObservationModel<f64>,
    opts: &SolveOptions,
) -> Result<WorstCase, WdreError> {
    ensure_consistent(spec, model)?;
    let n = model.state_dim();
    let m = model.obs_dim();
    if f.a.nrows() != n || f.a.ncols() != m {
        return Err(ModelError::DimensionMismatch {
            context: "worst_case_mse",
            expected: format!("estimator gain {n}x{m}"),
            found: format!("estimator gain {}x{}", f.a.nrows(), f.a.ncols()),
        }
        .into());
    }

    let k = Mat::identity(n).sub(&f.a.matmul(model.h()));
    let k_mu_x = k.matvec(spec.nominal_x.mean());
    let a_mu_w = f.a.matvec(spec.nominal_w.mean());
    let b_res: Vec<f64> = (0..n)
        .map(|i| -k_mu_x[i] + a_mu_w[i] + f.b[i])
        .collect();
    let homogeneous = norm2(&b_res)
        <= 1e-9
            * (1.0
                + norm2(&f.b)
                + norm2(spec.nominal_x.mean())
                + norm2(spec.nominal_w.mean()));

    let d = error_gain(&k, &f.a);
    let ktk = gram(&k);
    let ata = gram(&f.a);

    // Stacked mean block: (mu~_x; mu~_w), plus a unit coordinate when the
    // residual offset is nonzero.
    let s_dim = if homogeneous { n + m } else { n + m + 1 };
    let e_x = diag_indicator(s_dim, 0, n);
    let e_w = diag_indicator(s_dim, n, n + m);

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
    let s = prob.add_psd_block(s_dim);
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
        vec![(s, Coeff::Psd(e_w.clone()))],
    );

    prob.set_objective(sigma_x, Coeff::Psd(ktk));
    prob.set_objective(sigma_w, Coeff::Psd(ata));
    if homogeneous {
        prob.set_objective(s, Coeff::Psd(gram(&d)));
    } else {
        let d_lifted = Mat::from_fn(n, s_dim, |i, j| {
            if j < n + m {
                d[(i, j)]
            } else {
                -b_res[i]
            }
        });
        prob.set_objective(s, Coeff::Psd(gram(&d_lifted)));
        prob.add_constraint(
            Some("corner"),
            vec![(s, entry_coeff(s_dim, n + m, n + m))],
            Sense::Eq,
            1.0,
        );
    }

    let sol = solve_sdp(&prob, opts);
    if sol.status != SolveStatus::Optimal {
        return Err(WdreError::SolverFailed {
            status: sol.status,
            context: "evaluating a fixed estimator's worst case",
        });
    }
    let s_star = sol.psd_block(s);

    let mu = if homogeneous {
        let usage_x = e_x.inner(s_star);
        let usage_w = e_w.inner(s_star);
        if mean_movement_is_noise(usage_x, usage_w, spec.rho_x, spec.rho_w) {
            vec![0.0; n + m]
        } else {
            rank_one_reduce(s_star, &gram(&d), &e_x, &e_w, usage_x, usage_w)?
        }
    } else {
        let corner = s_star.get(n + m, n + m);
        (0..n + m).map(|i| s_star.get(i, n + m) / corner).collect()
    };

    let mean_x: Vec<f64> = (0..n)
        .map(|i| spec.nominal_x.mean()[i] + mu[i])
        .collect();
    let mean_w: Vec<f64> = (0..m)
        .map(|k| spec.nominal_w.mean()[k] + mu[n + k])
        .collect();
    let argmax_x = GaussianSpec::new(mean_x, sol.psd_block(sigma_x).clone())?;
    let argmax_w = GaussianSpec::new(mean_w, sol.psd_block(sigma_w).clone())?;
    Ok(WorstCase {
        value: sol.primal_value,
        argmax_x,
        argmax_w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mse_affine;
    use crate::SymMatrix;

    fn scalar_spec(rho: f64) -> (AmbiguitySpec<f64>, ObservationModel<f64>) {
        let g = GaussianSpec::centered(SymMatrix::identity(1)).unwrap();
        let spec = AmbiguitySpec::new(g.clone(), g, rho, rho).unwrap();
        let model = ObservationModel::new(Mat::identity(1));
        (spec, model)
    }

    fn scalar_estimator(a: f64, b: f64) -> AffineEstimator<f64> {
        AffineEstimator::new(Mat::from_rows(&[vec![a]]).unwrap(), vec![b]).unwrap()
    }

    #[test]
    fn halving_estimator_on_the_counterexample() {
        let (spec, model) = scalar_spec(2.0);
        let f = scalar_estimator(0.5, 0.0);
        let wc = worst_case_mse(&f, &spec, &model).unwrap();
        assert!((wc.value - 5.0).abs() < 1e-5, "value {}", wc.value);
        assert!((wc.argmax_x.mean()[0] - 3.0f64.sqrt()).abs() < 1e-3);
        assert!((wc.argmax_w.mean()[0] + 3.0f64.sqrt()).abs() < 1e-3);
        assert!((wc.argmax_x.cov().get(0, 0) - 4.0).abs() < 1e-3);
        assert!((wc.argmax_w.cov().get(0, 0) - 4.0).abs() < 1e-3);
        let attained = mse_affine(&f, &model, &wc.argmax_x, &wc.argmax_w).unwrap();
        assert!((attained - wc.value).abs() < 1e-4);
    }

    #[test]
    fn zero_estimator_moves_all_budget_into_the_signal_variance() {
        let (spec, model) = scalar_spec(2.0);
        let f = scalar_estimator(0.0, 0.0);
        let wc = worst_case_mse(&f, &spec, &model).unwrap();
        assert!((wc.value - 9.0).abs() < 1e-4, "value {}", wc.value);
        assert!(wc.argmax_x.mean()[0].abs() < 1e-3);
        assert!((wc.argmax_x.cov().get(0, 0) - 9.0).abs() < 1e-4);
    }

    #[test]
    fn offset_estimator_takes_the_lifted_path_and_attains_its_value() {
        let (spec, model) = scalar_spec(2.0);
        let f = scalar_estimator(0.5, 0.3);
        let wc = worst_case_mse(&f, &spec, &model).unwrap();
        let unbiased = worst_case_mse(&scalar_estimator(0.5, 0.0), &spec, &model)
            .unwrap()
            .value;
        assert!(wc.value >= unbiased - 1e-6, "offset must not help");
        let attained = mse_affine(&f, &model, &wc.argmax_x, &wc.argmax_w).unwrap();
        assert!(
            (attained - wc.value).abs() < 1e-4,
            "attained {attained} vs value {}",
            wc.value
        );
    }

    #[test]
    fn value_dominates_the_nominal_mse() {
        let (spec, model) = scalar_spec(0.5);
        let f = scalar_estimator(0.3, -0.2);
        let wc = worst_case_mse(&f, &spec, &model).unwrap();
        let nominal = mse_affine(&f, &model, &spec.nominal_x, &spec.nominal_w).unwrap();
        assert!(wc.value >= nominal - 1e-8);
    }

    #[test]
    fn wrong_gain_shape_is_rejected() {
        let (spec, model) = scalar_spec(1.0);
        let f = AffineEstimator::new(Mat::identity(2), vec![0.0, 0.0]).unwrap();
        assert!(worst_case_mse(&f, &spec, &model).is_err());
    }
}
