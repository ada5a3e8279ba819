//! Solver-level properties on randomized strictly feasible instances:
//! self-certified KKT residuals, weak duality, objective-scaling
//! invariance, and determinism.

use wdre_core::sdp::{
    kkt_residuals, solve_sdp, BlockId, Coeff, PrimalBlock, SdpProblem, SdpSolution, Sense,
    SolveOptions, SolveStatus,
};
use wdre_core::{Mat, SymMatrix};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_sym(rng: &mut StdRng, n: usize, scale: f64) -> SymMatrix {
    SymMatrix::from_fn_upper(n, |_, _| rng.gen_range(-scale..scale))
}

fn random_pd(rng: &mut StdRng, n: usize) -> SymMatrix {
    let b = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    SymMatrix::from_mat(b.matmul(&b.transpose()))
        .unwrap()
        .add(&SymMatrix::identity(n).scaled(0.1))
}

/// Builds a problem with a known strictly feasible primal/dual pair, so the
/// solver must reach Optimal and the independent KKT check must pass.
fn strictly_feasible_instance(rng: &mut StdRng) -> SdpProblem {
    let dims = [rng.gen_range(2..=6), rng.gen_range(2..=6)];
    let num_rows = rng.gen_range(2..=6);
    let mut prob = SdpProblem::new();
    let ids: Vec<BlockId> = dims.iter().map(|&d| prob.add_psd_block(d)).collect();

    let x0: Vec<SymMatrix> = dims.iter().map(|&d| random_pd(rng, d)).collect();
    let z0: Vec<SymMatrix> = dims.iter().map(|&d| random_pd(rng, d)).collect();

    let mut coeffs: Vec<Vec<SymMatrix>> = Vec::new();
    let mut gammas: Vec<f64> = Vec::new();
    let mut senses: Vec<Sense> = Vec::new();
    for k in 0..num_rows {
        let row: Vec<SymMatrix> = dims.iter().map(|&d| random_sym(rng, d, 1.0)).collect();
        let le = k % 2 == 0;
        senses.push(if le { Sense::Le } else { Sense::Eq });
        gammas.push(if le {
            rng.gen_range(0.1..1.0)
        } else {
            rng.gen_range(-1.0..1.0)
        });
        coeffs.push(row);
    }

    // Objective chosen so that (gamma0, Z0) is strictly dual feasible:
    // C_b = sum_k gamma_k A_kb - Z0_b.
    for (b, id) in ids.iter().enumerate() {
        let mut c = z0[b].scaled(-1.0);
        for (k, row) in coeffs.iter().enumerate() {
            c = c.add(&row[b].scaled(gammas[k]));
        }
        prob.set_objective(*id, Coeff::Psd(c));
    }

    // Right-hand sides chosen so that X0 is strictly primal feasible.
    for (k, row) in coeffs.iter().enumerate() {
        let mut value = 0.0;
        for (b, a) in row.iter().enumerate() {
            value += a.inner(&x0[b]);
        }
        let rhs = match senses[k] {
            Sense::Eq => value,
            Sense::Le => value + rng.gen_range(0.1..1.0),
        };
        let terms = ids
            .iter()
            .zip(row)
            .map(|(id, a)| (*id, Coeff::Psd(a.clone())))
            .collect();
        prob.add_constraint(Some(&format!("row{k}")), terms, senses[k], rhs);
    }
    prob
}

#[test]
fn random_strictly_feasible_instances_certify() {
    let mut rng = StdRng::seed_from_u64(2024);
    for trial in 0..20 {
        let prob = strictly_feasible_instance(&mut rng);
        let sol = solve_sdp(&prob, &SolveOptions::default());
        assert_eq!(
            sol.status,
            SolveStatus::Optimal,
            "trial {trial} did not reach optimality"
        );
        let res = kkt_residuals(&prob, &sol);
        assert!(
            res.max_residual() <= 1e-7,
            "trial {trial} residuals {res:?}"
        );
    }
}

#[test]
fn weak_duality_on_returned_iterates() {
    let mut rng = StdRng::seed_from_u64(77);
    for _ in 0..10 {
        let prob = strictly_feasible_instance(&mut rng);
        let sol = solve_sdp(&prob, &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(
            sol.primal_value <= sol.dual_value + 1e-6 * (1.0 + sol.primal_value.abs()),
            "weak duality violated: {} > {}",
            sol.primal_value,
            sol.dual_value
        );
    }
}

fn scale_objective(prob: &mut SdpProblem, scale: f64) {
    for b in 0..prob.num_blocks() {
        let id = BlockId(b);
        if let Some(coeff) = prob.objective_coeff(id).cloned() {
            let scaled = match coeff {
                Coeff::Psd(m) => Coeff::Psd(m.scaled(scale)),
                Coeff::Scalar(v) => Coeff::Scalar(v * scale),
            };
            prob.set_objective(id, scaled);
        }
    }
}

fn block_deviation(a: &SdpSolution, b: &SdpSolution) -> f64 {
    let mut dev = 0.0f64;
    for (x1, x2) in a.primal_blocks.iter().zip(&b.primal_blocks) {
        match (x1, x2) {
            (PrimalBlock::Psd(m1), PrimalBlock::Psd(m2)) => {
                dev = dev.max(m1.sub(m2).max_abs() / (1.0 + m1.max_abs()));
            }
            (PrimalBlock::Scalar(v1), PrimalBlock::Scalar(v2)) => {
                dev = dev.max((v1 - v2).abs() / (1.0 + v1.abs()));
            }
            _ => unreachable!(),
        }
    }
    dev
}

#[test]
fn objective_scaling_leaves_argmax_in_place() {
    // A power-of-two factor survives the internal objective normalization
    // bit for bit, so the solve is reproduced exactly.
    for seed in 0..10u64 {
        let mut rng = StdRng::seed_from_u64(seed);
        let prob = strictly_feasible_instance(&mut rng);
        let mut scaled = prob.clone();
        scale_objective(&mut scaled, 2.0);
        let base = solve_sdp(&prob, &SolveOptions::default());
        let scaled_sol = solve_sdp(&scaled, &SolveOptions::default());
        assert_eq!(base.status, SolveStatus::Optimal, "seed {seed}");
        assert_eq!(block_deviation(&base, &scaled_sol), 0.0, "seed {seed}");
        assert!(
            (scaled_sol.primal_value - 2.0 * base.primal_value).abs()
                <= 1e-12 * (1.0 + base.primal_value.abs()),
            "seed {seed}"
        );
    }

    // A general factor perturbs the normalized objective at the last ulp,
    // so agreement is to rounding amplification rather than exact.
    for seed in [0u64, 7, 16, 18, 21] {
        let mut rng = StdRng::seed_from_u64(seed);
        let prob = strictly_feasible_instance(&mut rng);
        let mut scaled = prob.clone();
        let scale = 3.7;
        scale_objective(&mut scaled, scale);
        let base = solve_sdp(&prob, &SolveOptions::default());
        let scaled_sol = solve_sdp(&scaled, &SolveOptions::default());
        assert_eq!(base.status, SolveStatus::Optimal, "seed {seed}");
        assert_eq!(scaled_sol.status, SolveStatus::Optimal, "seed {seed}");
        let dev = block_deviation(&base, &scaled_sol);
        assert!(dev <= 1e-6, "seed {seed}: blocks moved by {dev}");
        assert!(
            (scaled_sol.primal_value - scale * base.primal_value).abs()
                <= 1e-6 * (1.0 + scale * base.primal_value.abs()),
            "seed {seed}: values {} vs {}",
            scaled_sol.primal_value,
            scale * base.primal_value
        );
    }
}

#[test]
fn resolving_is_bit_identical() {
    let mut rng = StdRng::seed_from_u64(99);
    let prob = strictly_feasible_instance(&mut rng);
    let a = solve_sdp(&prob, &SolveOptions::default());
    let b = solve_sdp(&prob, &SolveOptions::default());
    assert_eq!(a.primal_value.to_bits(), b.primal_value.to_bits());
    assert_eq!(a.dual_value.to_bits(), b.dual_value.to_bits());
    assert_eq!(a.iterations, b.iterations);
    for (da, db) in a.dual_rows.iter().zip(&b.dual_rows) {
        assert_eq!(da.to_bits(), db.to_bits());
    }
}
