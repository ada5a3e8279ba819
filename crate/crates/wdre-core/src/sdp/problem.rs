//! Problem construction: blocks, objective, labeled rows, and LMI groups.
//!
//! Construction errors are programmer errors (mismatched dimensions, reused
//! labels), so the builder panics rather than returning results; user-data
//! validation belongs to the layers above.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;

use crate::SymMatrix;

/// Handle to a variable block of an [`SdpProblem`], returned at
/// declaration time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockId(pub usize);

/// Coefficient attached to one block in one row or in the objective:
/// a symmetric matrix for a PSD block, a plain scalar for a nonnegative
/// scalar block. The associated value is the Frobenius inner product with
/// the block (respectively an ordinary product).
#[derive(Debug, Clone)]
pub enum Coeff {
    Psd(SymMatrix),
    Scalar(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Eq,
    Le,
}

/// Summary of the cone a problem optimizes over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConeSpec {
    pub psd_block_dims: Vec<usize>,
    pub num_nonneg: usize,
}

#[derive(Debug, Clone)]
pub(crate) enum BlockKind {
    Psd(usize),
    Nonneg,
}

#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub terms: Vec<(BlockId, Coeff)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub(crate) enum LabelTarget {
    /// A single scalar-valued row.
    Row(usize),
    /// An LMI group: `rows` covers one equality per upper-triangle entry of
    /// a `dim`-dimensional matrix inequality whose slack is block `slack`.
    Group {
        rows: Range<usize>,
        dim: usize,
        slack: BlockId,
    },
}

/// A semidefinite program in maximization form:
///
/// maximize `sum_b <C_b, X_b>` subject to labeled rows
/// `sum_b <A_kb, X_b> (= | <=) r_k`, with each `X_b` either PSD or a
/// nonnegative scalar.
#[derive(Debug, Clone, Default)]
pub struct SdpProblem {
    pub(crate) blocks: Vec<BlockKind>,
    pub(crate) objective: Vec<Option<Coeff>>,
    pub(crate) rows: Vec<Row>,
    pub(crate) labels: BTreeMap<String, LabelTarget>,
}

/// Staged linear matrix inequality `M(X) >= 0`, entered entry by entry on
/// the upper triangle: `M(X)_ij = const_ij + sum_b <C_ij_b, X_b>`.
#[derive(Debug, Clone)]
pub struct LmiBuilder {
    dim: usize,
    consts: SymMatrix,
    terms: Vec<Vec<(BlockId, Coeff)>>,
}

impl LmiBuilder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "LMI dimension must be positive");
        LmiBuilder {
            dim,
            consts: SymMatrix::zeros(dim),
            terms: vec![Vec::new(); dim * (dim + 1) / 2],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn upper_index(&self, i: usize, j: usize) -> usize {
        assert!(
            i <= j && j < self.dim,
            "LMI entry ({i},{j}) outside the upper triangle of dimension {}",
            self.dim
        );
        // Row-major upper triangle: row i contributes (dim - i) entries.
        i * self.dim - i * (i + 1) / 2 + j
    }

    /// Adds a constant contribution to entry `(i, j)`, `i <= j`.
    pub fn constant(&mut self, i: usize, j: usize, v: f64) -> &mut Self {
        let cur = self.consts.get(i, j);
        let _ = self.upper_index(i, j);
        self.consts.set(i, j, cur + v);
        self
    }

    /// Adds `<coeff, X_block>` to entry `(i, j)`, `i <= j`.
    pub fn term(&mut self, i: usize, j: usize, block: BlockId, coeff: Coeff) -> &mut Self {
        let idx = self.upper_index(i, j);
        self.terms[idx].push((block, coeff));
        self
    }
}

impl SdpProblem {
    pub fn new() -> Self {
        SdpProblem::default()
    }

    pub fn add_psd_block(&mut self, dim: usize) -> BlockId {
        assert!(dim > 0, "PSD block dimension must be positive");
        self.blocks.push(BlockKind::Psd(dim));
        self.objective.push(None);
        BlockId(self.blocks.len() - 1)
    }

    pub fn add_nonneg_scalar(&mut self) -> BlockId {
        self.blocks.push(BlockKind::Nonneg);
        self.objective.push(None);
        BlockId(self.blocks.len() - 1)
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn cone(&self) -> ConeSpec {
        ConeSpec {
            psd_block_dims: self
                .blocks
                .iter()
                .filter_map(|b| match b {
                    BlockKind::Psd(d) => Some(*d),
                    BlockKind::Nonneg => None,
                })
                .collect(),
            num_nonneg: self
                .blocks
                .iter()
                .filter(|b| matches!(b, BlockKind::Nonneg))
                .count(),
        }
    }

    /// Dimension of a PSD block, or `None` for a scalar block.
    pub fn block_dim(&self, id: BlockId) -> Option<usize> {
        match self.blocks[id.0] {
            BlockKind::Psd(d) => Some(d),
            BlockKind::Nonneg => None,
        }
    }

    fn check_coeff(&self, block: BlockId, coeff: &Coeff, context: &str) {
        match (&self.blocks[block.0], coeff) {
            (BlockKind::Psd(d), Coeff::Psd(m)) => assert_eq!(
                m.dim(),
                *d,
                "{context}: coefficient dimension {} does not match block {} of dimension {d}",
                m.dim(),
                block.0
            ),
            (BlockKind::Nonneg, Coeff::Scalar(_)) => {}
            (BlockKind::Psd(_), Coeff::Scalar(_)) => {
                panic!("{context}: scalar coefficient attached to PSD block {}", block.0)
            }
            (BlockKind::Nonneg, Coeff::Psd(_)) => {
                panic!("{context}: matrix coefficient attached to scalar block {}", block.0)
            }
        }
    }

    /// Sets the objective coefficient of one block (maximization). At most
    /// one coefficient per block; later calls replace earlier ones.
    pub fn set_objective(&mut self, block: BlockId, coeff: Coeff) {
        self.check_coeff(block, &coeff, "set_objective");
        self.objective[block.0] = Some(coeff);
    }

    /// Current objective coefficient of one block, if any was set.
    pub fn objective_coeff(&self, block: BlockId) -> Option<&Coeff> {
        self.objective[block.0].as_ref()
    }

    fn register_label(&mut self, label: Option<&str>, target: LabelTarget) {
        if let Some(name) = label {
            let prior = self.labels.insert(name.to_owned(), target);
            assert!(prior.is_none(), "duplicate constraint label {name:?}");
        }
    }

    /// Adds one scalar row `sum_b <coeff_b, X_b> (sense) rhs`.
    pub fn add_constraint(
        &mut self,
        label: Option<&str>,
        terms: Vec<(BlockId, Coeff)>,
        sense: Sense,
        rhs: f64,
    ) {
        assert!(!terms.is_empty(), "constraint row must reference a block");
        for (block, coeff) in &terms {
            self.check_coeff(*block, coeff, "add_constraint");
        }
        self.rows.push(Row { terms, sense, rhs });
        self.register_label(label, LabelTarget::Row(self.rows.len() - 1));
    }

    /// Adds the matrix inequality `M(X) >= 0` staged in `lmi` under `label`.
    ///
    /// Internally this declares a PSD slack block `Z` (returned, so callers
    /// can read `M(X*)` from the solution) and one equality per upper
    /// triangle entry, `<E_ij, Z> - sum_b <C_ij_b, X_b> = const_ij`. The
    /// duals of those rows reassemble into the LMI's PSD dual matrix `W`,
    /// retrievable by `label`.
    pub fn add_lmi_group(&mut self, label: &str, lmi: LmiBuilder) -> BlockId {
        let dim = lmi.dim;
        let slack = self.add_psd_block(dim);
        let first_row = self.rows.len();
        let mut entry = 0;
        for i in 0..dim {
            for j in i..dim {
                let mut probe = SymMatrix::zeros(dim);
                probe.set(i, j, if i == j { 1.0 } else { 0.5 });
                let mut terms = vec![(slack, Coeff::Psd(probe))];
                for (block, coeff) in &lmi.terms[entry] {
                    self.check_coeff(*block, coeff, "add_lmi_group");
                    let negated = match coeff {
                        Coeff::Psd(m) => Coeff::Psd(m.scaled(-1.0)),
                        Coeff::Scalar(v) => Coeff::Scalar(-v),
                    };
                    terms.push((*block, negated));
                }
                self.rows.push(Row {
                    terms,
                    sense: Sense::Eq,
                    rhs: lmi.consts.get(i, j),
                });
                entry += 1;
            }
        }
        self.register_label(
            Some(label),
            LabelTarget::Group {
                rows: first_row..self.rows.len(),
                dim,
                slack,
            },
        );
        slack
    }

    /// Plain-text dump of the full problem data for cross-checking against
    /// external solvers. Not a stability-guaranteed format.
    pub fn dump_text(&self) -> String {
        let mut out = String::new();
        let cone = self.cone();
        let _ = writeln!(
            out,
            "sdp: {} blocks (psd dims {:?}, {} nonneg), {} rows",
            self.blocks.len(),
            cone.psd_block_dims,
            cone.num_nonneg,
            self.rows.len()
        );
        let fmt_coeff = |c: &Coeff| match c {
            Coeff::Scalar(v) => format!("{v}"),
            Coeff::Psd(m) => {
                let mut s = String::from("[");
                for i in 0..m.dim() {
                    for j in i..m.dim() {
                        if m.get(i, j) != 0.0 {
                            let _ = write!(s, " ({i},{j})={}", m.get(i, j));
                        }
                    }
                }
                s.push_str(" ]");
                s
            }
        };
        let _ = writeln!(out, "maximize:");
        for (b, c) in self.objective.iter().enumerate() {
            if let Some(c) = c {
                let _ = writeln!(out, "  block {b}: {}", fmt_coeff(c));
            }
        }
        let label_of = |k: usize| -> String {
            for (name, target) in &self.labels {
                match target {
                    LabelTarget::Row(r) if *r == k => return format!(" label {name:?}"),
                    LabelTarget::Group { rows, .. } if rows.contains(&k) => {
                        return format!(" group {name:?}")
                    }
                    _ => {}
                }
            }
            String::new()
        };
        for (k, row) in self.rows.iter().enumerate() {
            let sense = match row.sense {
                Sense::Eq => "=",
                Sense::Le => "<=",
            };
            let _ = writeln!(out, "row {k}{} {sense} {}:", label_of(k), row.rhs);
            for (block, coeff) in &row.terms {
                let _ = writeln!(out, "  block {}: {}", block.0, fmt_coeff(coeff));
            }
        }
        out
    }

    /// Builds the dual matrix of an LMI group from per-row dual scalars.
    pub(crate) fn assemble_group_dual(rows: Range<usize>, dim: usize, duals: &[f64]) -> SymMatrix {
        let mut w = SymMatrix::zeros(dim);
        let mut k = rows.start;
        for i in 0..dim {
            for j in i..dim {
                let g = duals[k];
                w.set(i, j, if i == j { g } else { 0.5 * g });
                k += 1;
            }
        }
        debug_assert_eq!(k, rows.end);
        w
    }

    /// The LMI value `M(X) = Z` at given block values (for diagnostics).
    pub fn lmi_value(&self, label: &str, blocks: &[crate::sdp::PrimalBlock]) -> Option<SymMatrix> {
        match self.labels.get(label)? {
            LabelTarget::Group { slack, .. } => match &blocks[slack.0] {
                crate::sdp::PrimalBlock::Psd(z) => Some(z.clone()),
                crate::sdp::PrimalBlock::Scalar(_) => None,
            },
            LabelTarget::Row(_) => None,
        }
    }

    /// Objective value of explicit block values under this problem's
    /// (maximization) objective.
    pub fn objective_value(&self, blocks: &[crate::sdp::PrimalBlock]) -> f64 {
        let mut val = 0.0;
        for (b, c) in self.objective.iter().enumerate() {
            match (c, &blocks[b]) {
                (Some(Coeff::Psd(cm)), crate::sdp::PrimalBlock::Psd(x)) => val += cm.inner(x),
                (Some(Coeff::Scalar(cv)), crate::sdp::PrimalBlock::Scalar(x)) => val += cv * x,
                (None, _) => {}
                _ => panic!("objective coefficient does not match block kind"),
            }
        }
        val
    }
}

/// Identity-scaled coefficient, used all over the SDP builders.
pub(crate) fn trace_coeff(dim: usize, scale: f64) -> Coeff {
    Coeff::Psd(SymMatrix::identity(dim).scaled(scale))
}
