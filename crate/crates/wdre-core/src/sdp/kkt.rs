//! Independent KKT residual evaluation.
//!
//! Everything here is recomputed from the problem data and the returned
//! solution, sharing no state with the solver loop, so acceptance checks
//! can use it as a second opinion on solution quality.

use crate::SymMatrix;

use super::problem::{BlockKind, Coeff, SdpProblem, Sense};
use super::solve::{PrimalBlock, SdpSolution};

/// Worst-case normalized residuals of a primal/dual pair.
#[derive(Debug, Clone, Copy)]
pub struct KktResiduals {
    /// Row violations and primal cone violations, scaled by 1 + data size.
    pub primal_feas: f64,
    /// Dual cone violations: negative eigenvalues of the dual slacks,
    /// negative multipliers on inequality rows.
    pub dual_feas: f64,
    /// Relative objective mismatch between the primal value and the dual
    /// bound reconstructed from the row multipliers.
    pub gap: f64,
    /// Largest complementary-slackness product, scaled by 1 + |value|.
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max_residual(&self) -> f64 {
        self.primal_feas
            .max(self.dual_feas)
            .max(self.gap)
            .max(self.complementarity)
    }
}

fn coeff_inner(coeff: &Coeff, block: &PrimalBlock) -> f64 {
    match (coeff, block) {
        (Coeff::Psd(c), PrimalBlock::Psd(x)) => c.inner(x),
        (Coeff::Scalar(c), PrimalBlock::Scalar(x)) => c * x,
        _ => panic!("coefficient kind does not match block kind"),
    }
}

pub fn kkt_residuals(problem: &SdpProblem, sol: &SdpSolution) -> KktResiduals {
    assert_eq!(
        sol.primal_blocks.len(),
        problem.num_blocks(),
        "solution does not match problem block structure"
    );
    assert_eq!(sol.dual_rows.len(), problem.num_rows());

    let pval = problem.objective_value(&sol.primal_blocks);
    let mut dval = 0.0;
    for (k, row) in problem.rows.iter().enumerate() {
        dval += sol.dual_rows[k] * row.rhs;
    }

    let mut primal_feas = 0.0f64;
    let mut dual_feas = 0.0f64;
    let mut complementarity = 0.0f64;

    // Row residuals and row-level complementarity.
    for (k, row) in problem.rows.iter().enumerate() {
        let value: f64 = row
            .terms
            .iter()
            .map(|(b, c)| coeff_inner(c, &sol.primal_blocks[b.0]))
            .sum();
        let scale = 1.0 + row.rhs.abs();
        let gamma = sol.dual_rows[k];
        match row.sense {
            Sense::Eq => {
                primal_feas = primal_feas.max((value - row.rhs).abs() / scale);
            }
            Sense::Le => {
                primal_feas = primal_feas.max((value - row.rhs).max(0.0) / scale);
                dual_feas = dual_feas.max((-gamma).max(0.0) / (1.0 + gamma.abs()));
                complementarity = complementarity.max((gamma * (row.rhs - value)).abs());
            }
        }
    }

    // Primal cone membership.
    for block in &sol.primal_blocks {
        match block {
            PrimalBlock::Psd(x) => {
                let viol = (-x.lambda_min()).max(0.0) / (1.0 + x.frobenius_norm());
                primal_feas = primal_feas.max(viol);
            }
            PrimalBlock::Scalar(x) => {
                primal_feas = primal_feas.max((-x).max(0.0) / (1.0 + x.abs()));
            }
        }
    }

    // Dual slacks Z_b = sum_k gamma_k A_kb - C_b, required in the cone, and
    // their complementarity with the primal blocks.
    for (bidx, kind) in problem.blocks.iter().enumerate() {
        match kind {
            BlockKind::Psd(d) => {
                let mut z = SymMatrix::zeros(*d);
                if let Some(Coeff::Psd(c)) = &problem.objective[bidx] {
                    z = c.scaled(-1.0);
                }
                for (k, row) in problem.rows.iter().enumerate() {
                    for (b, coeff) in &row.terms {
                        if b.0 == bidx {
                            if let Coeff::Psd(m) = coeff {
                                z = z.add(&m.scaled(sol.dual_rows[k]));
                            }
                        }
                    }
                }
                dual_feas = dual_feas.max((-z.lambda_min()).max(0.0) / (1.0 + z.frobenius_norm()));
                if let PrimalBlock::Psd(x) = &sol.primal_blocks[bidx] {
                    complementarity = complementarity.max(x.inner(&z).abs());
                }
            }
            BlockKind::Nonneg => {
                let mut z = 0.0;
                if let Some(Coeff::Scalar(c)) = &problem.objective[bidx] {
                    z = -c;
                }
                for (k, row) in problem.rows.iter().enumerate() {
                    for (b, coeff) in &row.terms {
                        if b.0 == bidx {
                            if let Coeff::Scalar(v) = coeff {
                                z += v * sol.dual_rows[k];
                            }
                        }
                    }
                }
                dual_feas = dual_feas.max((-z).max(0.0) / (1.0 + z.abs()));
                if let PrimalBlock::Scalar(x) = &sol.primal_blocks[bidx] {
                    complementarity = complementarity.max((x * z).abs());
                }
            }
        }
    }

    KktResiduals {
        primal_feas,
        dual_feas,
        gap: (pval - dval).abs() / (1.0 + pval.abs() + dval.abs()),
        complementarity: complementarity / (1.0 + pval.abs()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::{solve_sdp, SolveOptions, SolveStatus};
    use std::collections::BTreeMap;

    fn lp_problem() -> (SdpProblem, crate::sdp::BlockId) {
        let mut prob = SdpProblem::new();
        let x = prob.add_nonneg_scalar();
        prob.set_objective(x, Coeff::Scalar(1.0));
        prob.add_constraint(Some("cap"), vec![(x, Coeff::Scalar(1.0))], Sense::Le, 1.0);
        (prob, x)
    }

    fn exact_lp_solution() -> SdpSolution {
        SdpSolution {
            primal_blocks: vec![PrimalBlock::Scalar(1.0)],
            dual_rows: vec![1.0],
            dual_by_label: BTreeMap::new(),
            primal_value: 1.0,
            dual_value: 1.0,
            status: SolveStatus::Optimal,
            iterations: 0,
        }
    }

    #[test]
    fn exact_solution_has_zero_residuals() {
        let (prob, _) = lp_problem();
        let res = kkt_residuals(&prob, &exact_lp_solution());
        assert!(res.max_residual() <= 1e-12, "{res:?}");
    }

    #[test]
    fn perturbed_primal_breaks_complementarity() {
        let (prob, _) = lp_problem();
        let mut sol = exact_lp_solution();
        sol.primal_blocks[0] = PrimalBlock::Scalar(1.1);
        let res = kkt_residuals(&prob, &sol);
        assert!(res.complementarity > 1e-3, "{res:?}");
    }

    #[test]
    fn solver_output_passes_residual_check() {
        let (prob, _) = lp_problem();
        let sol = solve_sdp(&prob, &SolveOptions::default());
        let res = kkt_residuals(&prob, &sol);
        assert!(res.max_residual() <= 1e-7, "{res:?}");
    }
}
