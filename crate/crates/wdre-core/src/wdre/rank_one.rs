//! Rank-one extraction from a feasible matrix of a two-constraint SDP.

use super::WdreError;
use crate::SymMatrix;

/// Collapses a feasible PSD matrix of
///
/// ```text
/// max ⟨objective, S⟩   s.t.  ⟨c1, S⟩ ≤ budget1,  ⟨c2, S⟩ ≤ budget2,  S ⪰ 0
/// ```
///
/// into a single vector v whose outer product is feasible and no worse:
/// ⟨objective, vvᵀ⟩ ≥ ⟨objective, S⟩ − tol and both budgets overrun by at
/// most tol, where tol = 1e-6·(1+‖S‖_F).
///
/// The eigenfactors of S are rotated pairwise until each one's usage of the
/// two constraints is proportional to the usage of S itself; every rotation
/// preserves the sum of outer products, so the factors still add up to S.
/// Rescaling any one of them to consume exactly what S consumed keeps both
/// budget checks, and the factor with the best objective-per-usage ratio
/// meets or beats ⟨objective, S⟩ by averaging. No optimality of S is needed.
/// The sign of v is canonicalized so its first nonzero coordinate is
/// positive.
///
/// Fails with [`WdreError::RankReductionFailed`] when the certificate check
/// does not hold, e.g. when S itself overran the stated budgets.
pub fn rank_one_reduce(
    s: &SymMatrix,
    objective: &SymMatrix,
    c1: &SymMatrix,
    c2: &SymMatrix,
    budget1: f64,
    budget2: f64,
) -> Result<Vec<f64>, WdreError> {
    let n = s.dim();
    assert_eq!(objective.dim(), n, "rank_one_reduce: objective dimension");
    assert_eq!(c1.dim(), n, "rank_one_reduce: c1 dimension");
    assert_eq!(c2.dim(), n, "rank_one_reduce: c2 dimension");

    let tol = 1e-6 * (1.0 + s.frobenius_norm());
    let eig = s.sym_eigen();
    let lam_max = eig.values.last().copied().unwrap_or(0.0);
    if lam_max <= 0.0 {
        return Ok(vec![0.0; n]);
    }

    // Scaled eigenfactors p_i with S = sum p_i p_i^T, largest first.
    let mut factors: Vec<Vec<f64>> = Vec::new();
    for i in (0..n).rev() {
        let lam = eig.values[i];
        if lam <= 1e-12 * lam_max {
            continue;
        }
        let root = lam.sqrt();
        factors.push(eig.vectors.col(i).iter().map(|q| root * q).collect());
    }
    if factors.is_empty() {
        return Ok(vec![0.0; n]);
    }

    let tau1 = c1.inner(s);
    let tau2 = c2.inner(s);
    let tau_total = tau1 + tau2;
    let usage_floor = 1e-14 * (1.0 + tau1.abs() + tau2.abs());

    let candidates = if factors.len() == 1 {
        factors
    } else {
        proportional_split(factors, c1, c2, tau1, tau2)
    };

    // Rescale each candidate so it consumes exactly what S consumed, and keep
    // the one with the largest rescaled objective. A candidate with
    // (numerically) zero usage cannot pin a scale and is skipped; when S used
    // neither budget no rescaling happens at all.
    let usages: Vec<f64> = candidates
        .iter()
        .map(|w| c1.quad_form(w) + c2.quad_form(w))
        .collect();
    let usage_max = usages.iter().fold(0.0f64, |acc, u| acc.max(*u));
    let mut best: Option<(f64, usize, f64)> = None;
    for (k, w) in candidates.iter().enumerate() {
        if usages[k] <= 1e-14 * usage_max {
            continue;
        }
        let scale_sq = if tau_total > usage_floor {
            tau_total / usages[k]
        } else {
            1.0
        };
        let gain = scale_sq * objective.quad_form(w);
        if best.is_none_or(|(b, _, _)| gain > b) {
            best = Some((gain, k, scale_sq));
        }
    }
    let (_, pick, scale_sq) = best.unwrap_or((0.0, 0, 1.0));
    let scale = scale_sq.max(0.0).sqrt();
    let mut v: Vec<f64> = candidates[pick].iter().map(|ui| scale * ui).collect();

    if let Some(first) = v.iter().find(|x| **x != 0.0) {
        if *first < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }

    let obj_s = objective.inner(s);
    let obj_v = objective.quad_form(&v);
    let use1 = c1.quad_form(&v);
    let use2 = c2.quad_form(&v);
    if obj_v < obj_s - tol {
        return Err(WdreError::RankReductionFailed {
            detail: format!("objective dropped from {obj_s} to {obj_v}"),
        });
    }
    if use1 > budget1 + tol || use2 > budget2 + tol {
        return Err(WdreError::RankReductionFailed {
            detail: format!(
                "budgets exceeded: {use1} vs {budget1}, {use2} vs {budget2}"
            ),
        });
    }
    Ok(v)
}

/// Rewrites a factor list into one whose members all use the two constraints
/// in the ratio (tau1, tau2), without changing the sum of outer products.
///
/// With g(u) = (uᵀc1u)·tau2 − (uᵀc2u)·tau1, the factor values g(p_i) sum to
/// zero, so as long as two factors straddle zero they can be rotated into a
/// pair (w, w') where g(w) = 0 exactly: g along (p_i + t·p_j) is a quadratic
/// in t with real roots whenever g_i·g_j < 0, and the orthonormal rotation
/// keeps p_i p_iᵀ + p_j p_jᵀ intact. Each step retires one factor, so at most
/// len−1 rotations happen.
fn proportional_split(
    factors: Vec<Vec<f64>>,
    c1: &SymMatrix,
    c2: &SymMatrix,
    tau1: f64,
    tau2: f64,
) -> Vec<Vec<f64>> {
    let gval = |p: &[f64]| c1.quad_form(p) * tau2 - c2.quad_form(p) * tau1;
    let gmag = |p: &[f64]| c1.quad_form(p) * tau2 + c2.quad_form(p) * tau1;

    let mut pool = factors;
    let mut done: Vec<Vec<f64>> = Vec::with_capacity(pool.len());
    while pool.len() > 1 {
        let g: Vec<f64> = pool.iter().map(|p| gval(p)).collect();

        // Retire factors that are already proportional to working precision.
        if let Some(i) = (0..pool.len()).find(|&i| g[i].abs() <= 1e-9 * gmag(&pool[i])) {
            done.push(pool.swap_remove(i));
            continue;
        }

        // Merge the strongest opposite-sign pair; pairing dominant factors
        // keeps the rotation parameter well conditioned.
        let mut ipos: Option<usize> = None;
        let mut ineg: Option<usize> = None;
        for (k, gk) in g.iter().enumerate() {
            if *gk > 0.0 && ipos.is_none_or(|b| *gk > g[b]) {
                ipos = Some(k);
            }
            if *gk < 0.0 && ineg.is_none_or(|b| *gk < g[b]) {
                ineg = Some(k);
            }
        }
        let (Some(i), Some(j)) = (ipos, ineg) else {
            // Sum-to-zero leaves no single-signed remainder beyond roundoff;
            // retire the closest-to-zero factor and move on.
            let k = (0..pool.len())
                .min_by(|&a, &b| g[a].abs().total_cmp(&g[b].abs()))
                .expect("pool is nonempty");
            done.push(pool.swap_remove(k));
            continue;
        };

        // g(p_i + t p_j) = g_i + 2t·cross + t²·g_j has roots q/g_j and g_i/q
        // with q = −(cross + sign(cross)·disc); |q| ≥ disc > 0 because
        // g_i·g_j < 0. The smaller-magnitude root keeps the pair balanced.
        let cross = bilinear(c1, &pool[i], &pool[j]) * tau2
            - bilinear(c2, &pool[i], &pool[j]) * tau1;
        let disc = (cross * cross - g[i] * g[j]).max(0.0).sqrt();
        let q = -(cross + disc.copysign(cross));
        let root_a = q / g[j];
        let root_b = g[i] / q;
        let t = if root_a.abs() <= root_b.abs() {
            root_a
        } else {
            root_b
        };

        let inv_norm = 1.0 / (1.0 + t * t).sqrt();
        let w: Vec<f64> = pool[i]
            .iter()
            .zip(&pool[j])
            .map(|(a, b)| inv_norm * (a + t * b))
            .collect();
        let w_rest: Vec<f64> = pool[i]
            .iter()
            .zip(&pool[j])
            .map(|(a, b)| inv_norm * (b - t * a))
            .collect();
        done.push(w);
        pool[i] = w_rest;
        pool.swap_remove(j);
    }
    done.extend(pool);
    done
}

fn bilinear(m: &SymMatrix, a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            acc += ai * m.get(i, j) * bj;
        }
    }
    acc
}
