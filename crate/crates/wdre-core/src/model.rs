//! Estimation-theoretic vocabulary: Gaussians as moment pairs, the linear
//! observation model, affine estimators, the Gelbrich distance, and the
//! closed-form affine MSE with its nominal minimizer.
//!
//! Distributions are carried as moment pairs only. Everything the robust
//! estimation layer needs about a distribution is its mean and covariance,
//! so no sampling machinery lives here; sampling sits in `experiments`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, norm2, Mat, SymMatrix};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },
    #[error(
        "covariance is not positive semidefinite: min eigenvalue {min_eigenvalue:.6e} \
         below tolerance -{tolerance:.6e}"
    )]
    CovarianceNotPsd { min_eigenvalue: f64, tolerance: f64 },
    #[error("ambiguity radius {name} must be positive, got {value}")]
    InvalidRadius { name: &'static str, value: f64 },
}

/// Gaussian distribution recorded by its first two moments.
///
/// Construction checks that the covariance is positive semidefinite up to
/// the scalar type's eigenvalue tolerance; small negative eigenvalues from
/// rounding are accepted as written (downstream spectral operations clamp
/// them independently).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "RawGaussian<S>",
    into = "RawGaussian<S>",
    bound(
        serialize = "S: Scalar + Serialize",
        deserialize = "S: Scalar + Deserialize<'de>"
    )
)]
pub struct GaussianSpec<S: Scalar> {
    mean: Vec<S>,
    cov: SymMatrix<S>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(
    serialize = "S: Scalar + Serialize",
    deserialize = "S: Scalar + Deserialize<'de>"
))]
struct RawGaussian<S: Scalar> {
    mean: Vec<S>,
    cov: SymMatrix<S>,
}

impl<S: Scalar> GaussianSpec<S> {
    pub fn new(mean: Vec<S>, cov: SymMatrix<S>) -> Result<Self, ModelError> {
        if mean.len() != cov.dim() {
            return Err(ModelError::DimensionMismatch {
                context: "GaussianSpec::new",
                expected: format!("mean length {}", cov.dim()),
                found: format!("mean length {}", mean.len()),
            });
        }
        let eig = cov.sym_eigen();
        let lam_min = eig.values[0];
        let lam_max = *eig.values.last().unwrap();
        let tol = S::psd_eig_tol() * (S::one() + lam_max.max(S::zero()));
        if lam_min < -tol {
            return Err(ModelError::CovarianceNotPsd {
                min_eigenvalue: lam_min.as_f64(),
                tolerance: tol.as_f64(),
            });
        }
        Ok(GaussianSpec { mean, cov })
    }

    /// Zero-mean Gaussian.
    pub fn centered(cov: SymMatrix<S>) -> Result<Self, ModelError> {
        let n = cov.dim();
        Self::new(vec![S::zero(); n], cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[S] {
        &self.mean
    }

    pub fn cov(&self) -> &SymMatrix<S> {
        &self.cov
    }
}

impl<S: Scalar> TryFrom<RawGaussian<S>> for GaussianSpec<S> {
    type Error = ModelError;
    fn try_from(raw: RawGaussian<S>) -> Result<Self, ModelError> {
        GaussianSpec::new(raw.mean, raw.cov)
    }
}

impl<S: Scalar> From<GaussianSpec<S>> for RawGaussian<S> {
    fn from(g: GaussianSpec<S>) -> Self {
        RawGaussian {
            mean: g.mean,
            cov: g.cov,
        }
    }
}

/// Linear observation model `y = H x + w` with `H` of shape m-by-n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "S: Scalar + Serialize",
    deserialize = "S: Scalar + Deserialize<'de>"
))]
pub struct ObservationModel<S: Scalar> {
    #[serde(rename = "H")]
    h: Mat<S>,
}

impl<S: Scalar> ObservationModel<S> {
    pub fn new(h: Mat<S>) -> Self {
        ObservationModel { h }
    }

    pub fn h(&self) -> &Mat<S> {
        &self.h
    }

    /// Parameter dimension n (length of x).
    pub fn state_dim(&self) -> usize {
        self.h.ncols()
    }

    /// Observation dimension m (length of y and w).
    pub fn obs_dim(&self) -> usize {
        self.h.nrows()
    }
}

/// Affine estimator `x_hat = A y + b` with `A` of shape n-by-m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "S: Scalar + Serialize",
    deserialize = "S: Scalar + Deserialize<'de>"
))]
pub struct AffineEstimator<S: Scalar> {
    #[serde(rename = "A")]
    pub a: Mat<S>,
    pub b: Vec<S>,
}

impl<S: Scalar> AffineEstimator<S> {
    pub fn new(a: Mat<S>, b: Vec<S>) -> Result<Self, ModelError> {
        if a.nrows() != b.len() {
            return Err(ModelError::DimensionMismatch {
                context: "AffineEstimator::new",
                expected: format!("offset length {}", a.nrows()),
                found: format!("offset length {}", b.len()),
            });
        }
        Ok(AffineEstimator { a, b })
    }

    pub fn apply(&self, y: &[S]) -> Vec<S> {
        let mut out = self.a.matvec(y);
        for (o, &bi) in out.iter_mut().zip(&self.b) {
            *o += bi;
        }
        out
    }
}

/// Nominal Gaussians for signal and noise together with the two Gelbrich
/// ball radii. `positive_definite_nominals` records whether both nominal
/// covariances are strictly positive definite, a regularity condition some
/// certificates rely on; it is computed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguitySpec<S: Scalar> {
    pub nominal_x: GaussianSpec<S>,
    pub nominal_w: GaussianSpec<S>,
    pub rho_x: S,
    pub rho_w: S,
    positive_definite_nominals: bool,
}

impl<S: Scalar> AmbiguitySpec<S> {
    pub fn new(
        nominal_x: GaussianSpec<S>,
        nominal_w: GaussianSpec<S>,
        rho_x: S,
        rho_w: S,
    ) -> Result<Self, ModelError> {
        if !(rho_x > S::zero()) {
            return Err(ModelError::InvalidRadius {
                name: "rho_x",
                value: rho_x.as_f64(),
            });
        }
        if !(rho_w > S::zero()) {
            return Err(ModelError::InvalidRadius {
                name: "rho_w",
                value: rho_w.as_f64(),
            });
        }
        let pd = |g: &GaussianSpec<S>| {
            let eig = g.cov().sym_eigen();
            let lam_max = *eig.values.last().unwrap();
            eig.values[0] > S::psd_eig_tol() * (S::one() + lam_max.max(S::zero()))
        };
        let positive_definite_nominals = pd(&nominal_x) && pd(&nominal_w);
        Ok(AmbiguitySpec {
            nominal_x,
            nominal_w,
            rho_x,
            rho_w,
            positive_definite_nominals,
        })
    }

    pub fn positive_definite_nominals(&self) -> bool {
        self.positive_definite_nominals
    }
}

/// A complete problem statement: observation model plus ambiguity
/// description, with all dimensions cross-checked.
///
/// Serializes to the flat instance format
/// `{H, mu_x, mu_w, Sigma_x, Sigma_w, rho_x, rho_w}` where matrices are
/// nested row arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "RawInstance<S>",
    into = "RawInstance<S>",
    bound(
        serialize = "S: Scalar + Serialize",
        deserialize = "S: Scalar + Deserialize<'de>"
    )
)]
pub struct ProblemInstance<S: Scalar> {
    pub model: ObservationModel<S>,
    pub ambiguity: AmbiguitySpec<S>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(
    serialize = "S: Scalar + Serialize",
    deserialize = "S: Scalar + Deserialize<'de>"
))]
struct RawInstance<S: Scalar> {
    #[serde(rename = "H")]
    h: Mat<S>,
    mu_x: Vec<S>,
    mu_w: Vec<S>,
    #[serde(rename = "Sigma_x")]
    sigma_x: SymMatrix<S>,
    #[serde(rename = "Sigma_w")]
    sigma_w: SymMatrix<S>,
    rho_x: S,
    rho_w: S,
}

impl<S: Scalar> ProblemInstance<S> {
    pub fn new(
        model: ObservationModel<S>,
        ambiguity: AmbiguitySpec<S>,
    ) -> Result<Self, ModelError> {
        let (n, m) = (model.state_dim(), model.obs_dim());
        if ambiguity.nominal_x.dim() != n || ambiguity.nominal_w.dim() != m {
            return Err(ModelError::DimensionMismatch {
                context: "ProblemInstance::new",
                expected: format!("signal dim {n}, noise dim {m}"),
                found: format!(
                    "signal dim {}, noise dim {}",
                    ambiguity.nominal_x.dim(),
                    ambiguity.nominal_w.dim()
                ),
            });
        }
        Ok(ProblemInstance { model, ambiguity })
    }
}

impl<S: Scalar> TryFrom<RawInstance<S>> for ProblemInstance<S> {
    type Error = ModelError;
    fn try_from(raw: RawInstance<S>) -> Result<Self, ModelError> {
        let model = ObservationModel::new(raw.h);
        let nominal_x = GaussianSpec::new(raw.mu_x, raw.sigma_x)?;
        let nominal_w = GaussianSpec::new(raw.mu_w, raw.sigma_w)?;
        let ambiguity = AmbiguitySpec::new(nominal_x, nominal_w, raw.rho_x, raw.rho_w)?;
        ProblemInstance::new(model, ambiguity)
    }
}

impl<S: Scalar> From<ProblemInstance<S>> for RawInstance<S> {
    fn from(p: ProblemInstance<S>) -> Self {
        RawInstance {
            h: p.model.h.clone(),
            mu_x: p.ambiguity.nominal_x.mean.clone(),
            mu_w: p.ambiguity.nominal_w.mean.clone(),
            sigma_x: p.ambiguity.nominal_x.cov.clone(),
            sigma_w: p.ambiguity.nominal_w.cov.clone(),
            rho_x: p.ambiguity.rho_x,
            rho_w: p.ambiguity.rho_w,
        }
    }
}

/// Type-2 Wasserstein distance between two Gaussians (the Gelbrich
/// distance on moment pairs):
///
/// `sqrt(|mu_p - mu_q|^2 + tr[Sigma_p + Sigma_q - 2 (Sigma_q^{1/2} Sigma_p
/// Sigma_q^{1/2})^{1/2}])`.
///
/// The trace expression is analytically nonnegative; rounding residuals
/// below zero are clamped before the outer square root.
pub fn gelbrich_distance<S: Scalar>(
    p: &GaussianSpec<S>,
    q: &GaussianSpec<S>,
) -> Result<S, ModelError> {
    if p.dim() != q.dim() {
        return Err(ModelError::DimensionMismatch {
            context: "gelbrich_distance",
            expected: format!("dimension {}", p.dim()),
            found: format!("dimension {}", q.dim()),
        });
    }
    let root_q = q
        .cov()
        .psd_sqrt()
        .expect("validated covariance must admit a psd square root");
    let sandwich = p.cov().congruence(root_q.as_mat());
    let cross = sandwich
        .psd_sqrt()
        .expect("congruence of psd matrices must admit a psd square root");
    let mean_diff: Vec<S> = p
        .mean()
        .iter()
        .zip(q.mean())
        .map(|(&a, &b)| a - b)
        .collect();
    let two = S::real(2.0);
    let sq = norm2(&mean_diff).powi(2) + p.cov().trace() + q.cov().trace()
        - two * cross.trace();
    Ok(sq.max(S::zero()).sqrt())
}

/// Mean square error of the affine estimator `f(y) = A y + b` when
/// `x ~ px`, `w ~ pw`, and `y = H x + w`:
///
/// `tr[(AH - I) Sigma_x (AH - I)^T + A Sigma_w A^T]
///  + |(AH - I) mu_x + A mu_w + b|^2`.
pub fn mse_affine<S: Scalar>(
    f: &AffineEstimator<S>,
    model: &ObservationModel<S>,
    px: &GaussianSpec<S>,
    pw: &GaussianSpec<S>,
) -> Result<S, ModelError> {
    let (n, m) = (model.state_dim(), model.obs_dim());
    if f.a.nrows() != n || f.a.ncols() != m || px.dim() != n || pw.dim() != m {
        return Err(ModelError::DimensionMismatch {
            context: "mse_affine",
            expected: format!("A {n}x{m}, px dim {n}, pw dim {m}"),
            found: format!(
                "A {}x{}, px dim {}, pw dim {}",
                f.a.nrows(),
                f.a.ncols(),
                px.dim(),
                pw.dim()
            ),
        });
    }
    let mut ah = f.a.matmul(model.h());
    for i in 0..n {
        ah[(i, i)] -= S::one();
    }
    // tr(M Sigma M^T) = <M Sigma, M> entrywise.
    let cov_term = dot(ah.matmul(px.cov().as_mat()).as_slice(), ah.as_slice())
        + dot(f.a.matmul(pw.cov().as_mat()).as_slice(), f.a.as_slice());
    let mut bias = ah.matvec(px.mean());
    let aw = f.a.matvec(pw.mean());
    for i in 0..n {
        bias[i] += aw[i] + f.b[i];
    }
    Ok(cov_term + norm2(&bias).powi(2))
}

/// Minimum-MSE affine estimator for the given moments:
/// `A = Sigma_x H^T (H Sigma_x H^T + Sigma_w)^+`, with the offset chosen so
/// the estimate is unbiased, `b = (I - AH) mu_x - A mu_w`.
///
/// The pseudo-inverse makes the estimator well defined when the output
/// covariance is singular.
pub fn optimal_affine_estimator<S: Scalar>(
    model: &ObservationModel<S>,
    px: &GaussianSpec<S>,
    pw: &GaussianSpec<S>,
) -> Result<AffineEstimator<S>, ModelError> {
    let (n, m) = (model.state_dim(), model.obs_dim());
    if px.dim() != n || pw.dim() != m {
        return Err(ModelError::DimensionMismatch {
            context: "optimal_affine_estimator",
            expected: format!("px dim {n}, pw dim {m}"),
            found: format!("px dim {}, pw dim {}", px.dim(), pw.dim()),
        });
    }
    let output_cov = px.cov().congruence(model.h()).add(pw.cov());
    let pinv = output_cov.pseudo_inverse(None);
    let a = px
        .cov()
        .as_mat()
        .matmul(&model.h().transpose())
        .matmul(pinv.as_mat());
    let ah_mu = a.matvec(&model.h().matvec(px.mean()));
    let a_mu_w = a.matvec(pw.mean());
    let b: Vec<S> = (0..n)
        .map(|i| px.mean()[i] - ah_mu[i] - a_mu_w[i])
        .collect();
    AffineEstimator::new(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_gaussian(mean: f64, var: f64) -> GaussianSpec<f64> {
        GaussianSpec::new(vec![mean], SymMatrix::diag(&[var])).unwrap()
    }

    #[test]
    fn gaussian_rejects_indefinite_covariance() {
        let err = GaussianSpec::new(vec![0.0, 0.0], SymMatrix::diag(&[1.0, -0.5]));
        assert!(matches!(err, Err(ModelError::CovarianceNotPsd { .. })));
    }

    #[test]
    fn gaussian_rejects_mean_length_mismatch() {
        let err = GaussianSpec::new(vec![0.0], SymMatrix::identity(2));
        assert!(matches!(err, Err(ModelError::DimensionMismatch { .. })));
    }

    #[test]
    fn ambiguity_rejects_nonpositive_radius() {
        let g = scalar_gaussian(0.0, 1.0);
        let err = AmbiguitySpec::new(g.clone(), g, 0.0, 1.0);
        assert!(matches!(
            err,
            Err(ModelError::InvalidRadius { name: "rho_x", .. })
        ));
    }

    #[test]
    fn ambiguity_flags_degenerate_nominals() {
        let pd = scalar_gaussian(0.0, 1.0);
        let sing = GaussianSpec::new(vec![0.0], SymMatrix::diag(&[0.0])).unwrap();
        assert!(AmbiguitySpec::new(pd.clone(), pd.clone(), 1.0, 1.0)
            .unwrap()
            .positive_definite_nominals());
        assert!(!AmbiguitySpec::new(pd, sing, 1.0, 1.0)
            .unwrap()
            .positive_definite_nominals());
    }

    #[test]
    fn estimator_applies_gain_and_offset() {
        let f = AffineEstimator::new(
            Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap(),
            vec![0.5, -0.5],
        )
        .unwrap();
        assert_eq!(f.apply(&[1.0, 1.0]), vec![1.5, 1.5]);
    }

    #[test]
    fn instance_json_round_trip() {
        let json = r#"{
            "H": [[1.0, 0.0]],
            "mu_x": [0.0, 0.0],
            "mu_w": [0.0],
            "Sigma_x": [[1.0, 0.0], [0.0, 2.0]],
            "Sigma_w": [[1.0]],
            "rho_x": 0.5,
            "rho_w": 0.25
        }"#;
        let inst: ProblemInstance<f64> = serde_json::from_str(json).unwrap();
        assert_eq!(inst.model.obs_dim(), 1);
        assert_eq!(inst.model.state_dim(), 2);
        let back = serde_json::to_string(&inst).unwrap();
        let again: ProblemInstance<f64> = serde_json::from_str(&back).unwrap();
        assert_eq!(inst, again);
    }

    #[test]
    fn instance_json_rejects_inconsistent_dims() {
        let json = r#"{
            "H": [[1.0, 0.0]],
            "mu_x": [0.0],
            "mu_w": [0.0],
            "Sigma_x": [[1.0]],
            "Sigma_w": [[1.0]],
            "rho_x": 0.5,
            "rho_w": 0.25
        }"#;
        assert!(serde_json::from_str::<ProblemInstance<f64>>(json).is_err());
    }
}
