//! Dual multiplier recovery from the trace fixed-point equation, plus the
//! closed-form reconstruction of a least-favorable covariance from its
//! multiplier.

use super::WdreError;
use crate::{Mat, SymMatrix};

/// Finds the Lagrange multiplier of an active Gelbrich budget directly from
/// the estimator matrix, independent of any SDP dual.
///
/// For the gain-like matrix `kmat` (K* for the state side, A* for the noise
/// side), the returned γ is the unique root above λmax(KᵀK) of
///
/// ```text
/// Tr{ [γI − KᵀK]⁻¹ KᵀK (Σ̂/ρ²) KᵀK [γI − KᵀK]⁻¹ } = 1.
/// ```
///
/// The left side decreases monotonically from +∞ to 0 on that interval, so
/// the root is bracketed by doubling and then bisected. A zero `kmat`
/// returns 0: the objective carries no dependence on this side's covariance
/// and the budget constraint is slack.
pub fn recover_multiplier(
    kmat: &Mat,
    sigma_hat: &SymMatrix,
    rho: f64,
) -> Result<f64, WdreError> {
    assert!(rho > 0.0, "recover_multiplier: rho must be positive");
    assert_eq!(
        kmat.ncols(),
        sigma_hat.dim(),
        "recover_multiplier: K columns must match the covariance dimension"
    );
    if kmat.frobenius_norm() == 0.0 {
        return Ok(0.0);
    }

    let ktk = SymMatrix::symmetrize(kmat.transpose().matmul(kmat));
    let eig = ktk.sym_eigen();
    let d = eig.values.clone();
    let d_max = d.last().copied().unwrap_or(0.0).max(0.0);

    // Diagonal weights of Σ̂/ρ² in the eigenbasis of KᵀK: with
    // KᵀK = Q diag(d) Qᵀ the trace collapses to Σᵢ (dᵢ/(γ−dᵢ))² Mᵢᵢ.
    let q = &eig.vectors;
    let scaled = sigma_hat.scaled(1.0 / (rho * rho));
    let m_diag: Vec<f64> = (0..d.len())
        .map(|i| {
            let qi = q.col(i);
            scaled.quad_form(&qi)
        })
        .collect();

    let phi = |gamma: f64| -> f64 {
        d.iter()
            .zip(&m_diag)
            .map(|(&di, &mi)| {
                let r = di / (gamma - di);
                r * r * mi
            })
            .sum()
    };

    // Bracket: double the offset above d_max until phi drops below 1.
    let mut hi_off = d_max.max(1.0);
    let mut doublings = 0;
    while phi(d_max + hi_off) >= 1.0 {
        hi_off *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(WdreError::NoRoot {
                detail: format!(
                    "trace equation stayed above 1 out to gamma = {:e}",
                    d_max + hi_off
                ),
            });
        }
    }

    let mut lo = d_max;
    let mut hi = d_max + hi_off;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Reconstructs the least-favorable covariance from its multiplier:
///
/// ```text
/// Σ* = γ² [γI − KᵀK]⁻¹ Σ̂ [γI − KᵀK]⁻¹,
/// ```
///
/// valid only while γ clears λmax(KᵀK); returns `None` otherwise, which
/// callers treat as "closed form not applicable" rather than an error.
pub fn covariance_from_multiplier(
    kmat: &Mat,
    sigma_hat: &SymMatrix,
    gamma: f64,
) -> Option<SymMatrix> {
    let ktk = SymMatrix::symmetrize(kmat.transpose().matmul(kmat));
    let lam_max = ktk.sym_eigen().values.last().copied().unwrap_or(0.0);
    if gamma <= lam_max + 1e-8 {
        return None;
    }
    let n = ktk.dim();
    let shifted = SymMatrix::identity(n).scaled(gamma).sub(&ktk);
    let inv = shifted.pseudo_inverse(None);
    Some(sigma_hat.congruence(inv.as_mat()).scaled(gamma * gamma))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_large_radius() {
        let k = Mat::from_rows(&[vec![0.5]]).unwrap();
        let sigma = SymMatrix::diag(&[1.0]);
        let gamma = recover_multiplier(&k, &sigma, 2.0).unwrap();
        assert!((gamma - 0.375).abs() < 1e-12, "gamma = {gamma}");
    }

    #[test]
    fn scalar_small_radius() {
        let k = Mat::from_rows(&[vec![0.5]]).unwrap();
        let sigma = SymMatrix::diag(&[1.0]);
        let gamma = recover_multiplier(&k, &sigma, 0.5).unwrap();
        assert!((gamma - 0.75).abs() < 1e-12, "gamma = {gamma}");
    }

    #[test]
    fn zero_gain_returns_zero() {
        let k = Mat::zeros(2, 2);
        let sigma = SymMatrix::identity(2);
        assert_eq!(recover_multiplier(&k, &sigma, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_covariance_matches_scalar() {
        // gamma = 3/4, K = 1/2: Sigma* = gamma^2 sigma / (gamma - 1/4)^2
        // = (9/16) / (1/4) = 2.25.
        let k = Mat::from_rows(&[vec![0.5]]).unwrap();
        let sigma = SymMatrix::diag(&[1.0]);
        let cov = covariance_from_multiplier(&k, &sigma, 0.75).unwrap();
        assert!((cov.get(0, 0) - 2.25).abs() < 1e-12);
    }

    #[test]
    fn closed_form_requires_gamma_above_spectrum() {
        let k = Mat::from_rows(&[vec![1.0]]).unwrap();
        let sigma = SymMatrix::diag(&[1.0]);
        assert!(covariance_from_multiplier(&k, &sigma, 1.0).is_none());
    }

    #[test]
    fn matrix_case_satisfies_trace_equation() {
        let k = Mat::from_rows(&[vec![0.6, 0.1], vec![-0.2, 0.8]]).unwrap();
        let sigma = SymMatrix::from_fn_upper(2, |i, j| if i == j { 2.0 } else { 0.3 });
        let rho = 1.3;
        let gamma = recover_multiplier(&k, &sigma, rho).unwrap();
        // Recompute the trace expression directly.
        let ktk = SymMatrix::symmetrize(k.transpose().matmul(&k));
        let shifted = SymMatrix::identity(2).scaled(gamma).sub(&ktk);
        let inv = shifted.pseudo_inverse(None);
        let inner = inv
            .as_mat()
            .matmul(ktk.as_mat())
            .matmul(sigma.scaled(1.0 / (rho * rho)).as_mat())
            .matmul(ktk.as_mat())
            .matmul(inv.as_mat());
        let trace: f64 = (0..2).map(|i| inner[(i, i)]).sum();
        assert!((trace - 1.0).abs() < 1e-9, "trace = {trace}");
    }
}
