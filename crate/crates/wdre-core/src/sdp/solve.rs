//! Interior-point solve: homogeneous self-dual embedding, Nesterov-Todd
//! scaling, Mehrotra predictor-corrector, dense Schur complement.
//!
//! The user's maximization problem is converted to the internal
//! minimization form `min <c, x>` over the cone, with one nonnegative slack
//! per inequality row. The embedding tracks `(x, y, s, tau, kappa)`;
//! `x/tau` converges to the primal optimum on solvable problems, while
//! infeasibility and unboundedness surface as Farkas-type certificates with
//! `tau -> 0`.

use std::collections::BTreeMap;

use crate::linalg::dot;
use crate::{Mat, SymMatrix};

use super::problem::{BlockKind, Coeff, LabelTarget, SdpProblem, Sense};

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Relative duality-gap tolerance.
    pub gap_tol: f64,
    /// Relative primal/dual feasibility tolerance.
    pub feas_tol: f64,
    /// Iteration cap before declaring SlowProgress.
    pub max_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iters: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    SlowProgress,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::SlowProgress => "slow progress",
        };
        f.write_str(s)
    }
}

/// Value of one declared block at the solution.
#[derive(Debug, Clone)]
pub enum PrimalBlock {
    Psd(SymMatrix),
    Scalar(f64),
}

/// Dual variable addressed by a constraint label: a scalar for plain rows,
/// the assembled PSD dual matrix for LMI groups.
#[derive(Debug, Clone)]
pub enum DualValue {
    Scalar(f64),
    Mat(SymMatrix),
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// One entry per declared block (including LMI slack blocks), indexed
    /// by `BlockId`.
    pub primal_blocks: Vec<PrimalBlock>,
    /// Sign-normalized dual scalar per row: nonnegative on `<=` rows, free
    /// on equalities; LMI-group rows carry the entries of the dual matrix.
    pub dual_rows: Vec<f64>,
    pub dual_by_label: BTreeMap<String, DualValue>,
    /// Objective value of the returned primal point (maximization).
    pub primal_value: f64,
    /// Dual objective of the returned dual point; an upper bound on
    /// `primal_value` up to the gap tolerance.
    pub dual_value: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

// ---------------------------------------------------------------------------
// Internal problem form
// ---------------------------------------------------------------------------

/// Upper-triangle sparse view of a symmetric coefficient: `(i, j, v)` with
/// `i <= j`, `v` the matrix entry (mirrored implicitly).
#[derive(Debug, Clone)]
struct SparseSym {
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    fn from_sym(m: &SymMatrix) -> Self {
        let mut entries = Vec::new();
        for i in 0..m.dim() {
            for j in i..m.dim() {
                let v = m.get(i, j);
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        SparseSym { entries }
    }

    /// Frobenius inner product with a symmetric matrix.
    fn inner(&self, x: &SymMatrix) -> f64 {
        let mut acc = 0.0;
        for &(i, j, v) in &self.entries {
            acc += if i == j { v * x.get(i, i) } else { 2.0 * v * x.get(i, j) };
        }
        acc
    }

    /// Same inner product against a plain (symmetric by construction) Mat.
    fn inner_mat(&self, x: &Mat) -> f64 {
        let mut acc = 0.0;
        for &(i, j, v) in &self.entries {
            acc += if i == j { v * x[(i, i)] } else { 2.0 * v * x[(i, j)] };
        }
        acc
    }

    /// Accumulates `alpha * A` into `m` (both triangles).
    fn add_into(&self, m: &mut SymMatrix, alpha: f64) {
        for &(i, j, v) in &self.entries {
            m.set(i, j, m.get(i, j) + alpha * v);
        }
    }

    fn nnz(&self) -> usize {
        self.entries.len()
    }

    fn to_dense(&self, dim: usize) -> SymMatrix {
        let mut m = SymMatrix::zeros(dim);
        self.add_into(&mut m, 1.0);
        m
    }
}

#[derive(Debug)]
struct IRow {
    psd: Vec<(usize, SparseSym)>,
    scal: Vec<(usize, f64)>,
    rhs: f64,
}

/// Problem data in solver form.
struct Internal {
    psd_dims: Vec<usize>,
    nscal: usize,
    rows: Vec<IRow>,
    /// Internal minimization objective per PSD slot (negated user data).
    c_psd: Vec<SymMatrix>,
    c_scal: Vec<f64>,
    /// Maps user block index to its slot.
    slots: Vec<Slot>,
    /// Rows touching each PSD slot, as (row index, term position).
    psd_rows: Vec<Vec<(usize, usize)>>,
    /// Rows touching each scalar slot, as (row index, coefficient).
    scal_rows: Vec<Vec<(usize, f64)>>,
    /// Barrier degree: sum of block dims plus scalar count.
    nu: f64,
}

#[derive(Clone, Copy)]
enum Slot {
    Psd(usize),
    Scal(usize),
}

fn build_internal(problem: &SdpProblem) -> Internal {
    assert!(
        !problem.blocks.is_empty(),
        "problem must declare at least one block"
    );
    let mut psd_dims = Vec::new();
    let mut slots = Vec::with_capacity(problem.blocks.len());
    let mut nscal = 0usize;
    for kind in &problem.blocks {
        match kind {
            BlockKind::Psd(d) => {
                slots.push(Slot::Psd(psd_dims.len()));
                psd_dims.push(*d);
            }
            BlockKind::Nonneg => {
                slots.push(Slot::Scal(nscal));
                nscal += 1;
            }
        }
    }
    let user_scal = nscal;
    let le_count = problem
        .rows
        .iter()
        .filter(|r| r.sense == Sense::Le)
        .count();
    nscal += le_count;

    let mut rows = Vec::with_capacity(problem.rows.len());
    let mut next_slack = user_scal;
    for row in &problem.rows {
        // Accumulate repeated terms on one block before sparsifying.
        let mut psd_acc: BTreeMap<usize, SymMatrix> = BTreeMap::new();
        let mut scal_acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (block, coeff) in &row.terms {
            match (slots[block.0], coeff) {
                (Slot::Psd(p), Coeff::Psd(m)) => {
                    psd_acc
                        .entry(p)
                        .and_modify(|acc| *acc = acc.add(m))
                        .or_insert_with(|| m.clone());
                }
                (Slot::Scal(sidx), Coeff::Scalar(v)) => {
                    *scal_acc.entry(sidx).or_insert(0.0) += v;
                }
                _ => unreachable!("builder validated coefficient kinds"),
            }
        }
        let mut irow = IRow {
            psd: psd_acc
                .into_iter()
                .map(|(p, m)| (p, SparseSym::from_sym(&m)))
                .collect(),
            scal: scal_acc.into_iter().collect(),
            rhs: row.rhs,
        };
        if row.sense == Sense::Le {
            irow.scal.push((next_slack, 1.0));
            next_slack += 1;
        }
        rows.push(irow);
    }

    let mut c_psd: Vec<SymMatrix> = psd_dims.iter().map(|&d| SymMatrix::zeros(d)).collect();
    let mut c_scal = vec![0.0; nscal];
    for (b, obj) in problem.objective.iter().enumerate() {
        match (slots[b], obj) {
            (Slot::Psd(p), Some(Coeff::Psd(m))) => c_psd[p] = m.scaled(-1.0),
            (Slot::Scal(sidx), Some(Coeff::Scalar(v))) => c_scal[sidx] = -v,
            (_, None) => {}
            _ => unreachable!("builder validated objective kinds"),
        }
    }

    let mut psd_rows = vec![Vec::new(); psd_dims.len()];
    let mut scal_rows = vec![Vec::new(); nscal];
    for (k, row) in rows.iter().enumerate() {
        for (pos, (slot, _)) in row.psd.iter().enumerate() {
            psd_rows[*slot].push((k, pos));
        }
        for (slot, v) in &row.scal {
            scal_rows[*slot].push((k, *v));
        }
    }

    let nu = psd_dims.iter().sum::<usize>() as f64 + nscal as f64;
    Internal {
        psd_dims,
        nscal,
        rows,
        c_psd,
        c_scal,
        slots,
        psd_rows,
        scal_rows,
        nu,
    }
}

// ---------------------------------------------------------------------------
// Block vectors and points
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct BlockVec {
    m: Vec<SymMatrix>,
    s: Vec<f64>,
}

impl BlockVec {
    fn zeros(int: &Internal) -> Self {
        BlockVec {
            m: int.psd_dims.iter().map(|&d| SymMatrix::zeros(d)).collect(),
            s: vec![0.0; int.nscal],
        }
    }

    fn scaled_identity(int: &Internal, t: f64) -> Self {
        BlockVec {
            m: int
                .psd_dims
                .iter()
                .map(|&d| SymMatrix::identity(d).scaled(t))
                .collect(),
            s: vec![t; int.nscal],
        }
    }

    fn inner(&self, o: &Self) -> f64 {
        let mats: f64 = self
            .m
            .iter()
            .zip(&o.m)
            .map(|(a, b)| a.inner(b))
            .sum();
        mats + dot(&self.s, &o.s)
    }

    fn axpy(&mut self, alpha: f64, o: &Self) {
        for (a, b) in self.m.iter_mut().zip(&o.m) {
            *a = a.add(&b.scaled(alpha));
        }
        for (a, b) in self.s.iter_mut().zip(&o.s) {
            *a += alpha * b;
        }
    }

    fn norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    fn max_abs(&self) -> f64 {
        let mats = self.m.iter().fold(0.0f64, |acc, m| acc.max(m.max_abs()));
        self.s.iter().fold(mats, |acc, v| acc.max(v.abs()))
    }

    fn rescale(&mut self, alpha: f64) {
        for m in self.m.iter_mut() {
            *m = m.scaled(alpha);
        }
        for v in self.s.iter_mut() {
            *v *= alpha;
        }
    }
}

#[derive(Debug, Clone)]
struct PointState {
    x: BlockVec,
    y: Vec<f64>,
    s: BlockVec,
    tau: f64,
    kappa: f64,
}

fn apply_a(int: &Internal, v: &BlockVec) -> Vec<f64> {
    int.rows
        .iter()
        .map(|row| {
            let mut acc = 0.0;
            for (slot, sp) in &row.psd {
                acc += sp.inner(&v.m[*slot]);
            }
            for (slot, coef) in &row.scal {
                acc += coef * v.s[*slot];
            }
            acc
        })
        .collect()
}

fn apply_at(int: &Internal, y: &[f64]) -> BlockVec {
    let mut out = BlockVec::zeros(int);
    for (k, row) in int.rows.iter().enumerate() {
        let yk = y[k];
        if yk == 0.0 {
            continue;
        }
        for (slot, sp) in &row.psd {
            sp.add_into(&mut out.m[*slot], yk);
        }
        for (slot, coef) in &row.scal {
            out.s[*slot] += coef * yk;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Cholesky utilities
// ---------------------------------------------------------------------------

fn chol_with_jitter(m: &SymMatrix) -> Option<Mat> {
    if let Ok(l) = m.cholesky() {
        return Some(l);
    }
    let n = m.dim() as f64;
    let base = 1e-14 * (1.0 + m.trace().abs() / n);
    let mut jitter = base;
    for _ in 0..3 {
        let reg = m.add(&SymMatrix::identity(m.dim()).scaled(jitter));
        if let Ok(l) = reg.cholesky() {
            return Some(l);
        }
        jitter *= 100.0;
    }
    None
}

/// Solves `L L^T sol = rhs` with `L` lower triangular.
fn chol_solve(l: &Mat, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut z = rhs.to_vec();
    for i in 0..n {
        let row = l.row(i);
        let mut acc = z[i];
        for k in 0..i {
            acc -= row[k] * z[k];
        }
        z[i] = acc / row[i];
    }
    for i in (0..n).rev() {
        let mut acc = z[i];
        for k in (i + 1)..n {
            acc -= l[(k, i)] * z[k];
        }
        z[i] = acc / l[(i, i)];
    }
    z
}

// ---------------------------------------------------------------------------
// Nesterov-Todd scaling
// ---------------------------------------------------------------------------

struct Scaling {
    /// Per PSD slot: X = R diag(lambda) R^T and S = R^{-T} diag(lambda) R^{-1}.
    r: Vec<Mat>,
    rt: Vec<Mat>,
    rinv: Vec<Mat>,
    lambda: Vec<Vec<f64>>,
    /// W = R R^T, the NT metric the Schur complement is built from.
    w: Vec<Mat>,
    /// Scalar coordinates: w_i = x_i / s_i and lambda_i = sqrt(x_i s_i).
    w_scal: Vec<f64>,
    lam_scal: Vec<f64>,
    sqrt_w: Vec<f64>,
}

/// One-sided Jacobi SVD of a square nonsingular matrix: `m = U diag(sigma) V^T`.
fn one_sided_svd(m: &Mat) -> (Mat, Vec<f64>, Mat) {
    let n = m.ncols();
    let mut a = m.clone();
    let mut v = Mat::identity(n);
    for _sweep in 0..64 {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..n {
                    app += a[(i, p)] * a[(i, p)];
                    aqq += a[(i, q)] * a[(i, q)];
                    apq += a[(i, p)] * a[(i, q)];
                }
                if apq.abs() <= 1e-14 * (app * aqq).sqrt() + f64::MIN_POSITIVE {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = cs * aip - sn * aiq;
                    a[(i, q)] = sn * aip + cs * aiq;
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = cs * vip - sn * viq;
                    v[(i, q)] = sn * vip + cs * viq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma = vec![0.0; n];
    let mut u = a;
    for j in 0..n {
        let mut norm = 0.0;
        for i in 0..n {
            norm += u[(i, j)] * u[(i, j)];
        }
        let norm = norm.sqrt();
        sigma[j] = norm;
        if norm > 0.0 {
            for i in 0..n {
                u[(i, j)] /= norm;
            }
        }
    }
    (u, sigma, v)
}

fn compute_scaling(int: &Internal, p: &PointState) -> Option<Scaling> {
    let nblocks = int.psd_dims.len();
    let mut r = Vec::with_capacity(nblocks);
    let mut rt = Vec::with_capacity(nblocks);
    let mut rinv = Vec::with_capacity(nblocks);
    let mut lambda = Vec::with_capacity(nblocks);
    let mut w = Vec::with_capacity(nblocks);
    for slot in 0..nblocks {
        let l1 = chol_with_jitter(&p.x.m[slot])?;
        let l2 = chol_with_jitter(&p.s.m[slot])?;
        let prod = l2.transpose().matmul(&l1);
        let (u, sigma, v) = one_sided_svd(&prod);
        if sigma.iter().any(|&s| !(s > 0.0)) {
            return None;
        }
        let d = int.psd_dims[slot];
        // R = L1 V diag(sigma^{-1/2}); R^{-1} = diag(sigma^{-1/2}) U^T L2^T.
        let mut rb = l1.matmul(&v);
        for j in 0..d {
            let scale = sigma[j].sqrt().recip();
            for i in 0..d {
                rb[(i, j)] *= scale;
            }
        }
        let mut rib = u.transpose().matmul(&l2.transpose());
        for i in 0..d {
            let scale = sigma[i].sqrt().recip();
            for j in 0..d {
                rib[(i, j)] *= scale;
            }
        }
        let wb = rb.matmul(&rb.transpose());
        rt.push(rb.transpose());
        rinv.push(rib);
        w.push(wb);
        r.push(rb);
        lambda.push(sigma);
    }
    let mut w_scal = vec![0.0; int.nscal];
    let mut lam_scal = vec![0.0; int.nscal];
    let mut sqrt_w = vec![0.0; int.nscal];
    for i in 0..int.nscal {
        let (xi, si) = (p.x.s[i], p.s.s[i]);
        if !(xi > 0.0 && si > 0.0) {
            return None;
        }
        w_scal[i] = xi / si;
        lam_scal[i] = (xi * si).sqrt();
        sqrt_w[i] = w_scal[i].sqrt();
    }
    Some(Scaling {
        r,
        rt,
        rinv,
        lambda,
        w,
        w_scal,
        lam_scal,
        sqrt_w,
    })
}

/// Applies the NT metric blockwise: `W V W` on PSD slots, `w_i v_i` on
/// scalars.
fn w_apply(sc: &Scaling, v: &BlockVec) -> BlockVec {
    BlockVec {
        m: v
            .m
            .iter()
            .zip(&sc.w)
            .map(|(vb, wb)| vb.congruence(wb))
            .collect(),
        s: v
            .s
            .iter()
            .zip(&sc.w_scal)
            .map(|(vi, wi)| vi * wi)
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Schur complement
// ---------------------------------------------------------------------------

/// `W A_k W` for one row's coefficient on one PSD slot: outer-product
/// accumulation when the coefficient is sparse, two dense products
/// otherwise.
fn sandwich_row_coeff(sc: &Scaling, slot: usize, sp: &SparseSym, dim: usize) -> Mat {
    let wb = &sc.w[slot];
    if sp.nnz() <= 2 * dim {
        let mut t = Mat::zeros(dim, dim);
        for &(i, j, v) in &sp.entries {
            for a in 0..dim {
                let wai_v = wb[(a, i)] * v;
                let waj_v = wb[(a, j)] * v;
                for b in 0..dim {
                    if i == j {
                        t[(a, b)] += wai_v * wb[(b, i)];
                    } else {
                        t[(a, b)] += wai_v * wb[(b, j)] + waj_v * wb[(b, i)];
                    }
                }
            }
        }
        t
    } else {
        let dense = sp.to_dense(dim);
        wb.matmul(dense.as_mat()).matmul(wb)
    }
}

fn assemble_schur(int: &Internal, sc: &Scaling) -> Option<(SymMatrix, Mat)> {
    let nrows = int.rows.len();
    if nrows == 0 {
        let eye = SymMatrix::identity(1);
        let factor = chol_with_jitter(&eye)?;
        return Some((eye, factor));
    }
    let mut m = Mat::zeros(nrows, nrows);
    for slot in 0..int.psd_dims.len() {
        let touching = &int.psd_rows[slot];
        if touching.is_empty() {
            continue;
        }
        let dim = int.psd_dims[slot];
        let tmats: Vec<Mat> = touching
            .iter()
            .map(|(k, pos)| sandwich_row_coeff(sc, slot, &int.rows[*k].psd[*pos].1, dim))
            .collect();
        for (a, (k, _)) in touching.iter().enumerate() {
            for (l, pos_l) in touching.iter() {
                if l > k {
                    continue;
                }
                m[(*k, *l)] += int.rows[*l].psd[*pos_l].1.inner_mat(&tmats[a]);
            }
        }
    }
    for slot in 0..int.nscal {
        let touching = &int.scal_rows[slot];
        let wi = sc.w_scal[slot];
        for (a, (k, vk)) in touching.iter().enumerate() {
            for (l, vl) in touching.iter().take(a + 1) {
                m[(*k, *l)] += wi * vk * vl;
            }
        }
    }
    for i in 0..nrows {
        for j in (i + 1)..nrows {
            m[(i, j)] = m[(j, i)];
        }
    }
    let msym = SymMatrix::symmetrize(m);
    let factor = chol_with_jitter(&msym)?;
    Some((msym, factor))
}

/// Cholesky solve with one round of iterative refinement against the
/// unfactored matrix, which buys back accuracy once the Schur complement
/// turns ill-conditioned near convergence.
fn schur_solve(msym: &SymMatrix, l: &Mat, rhs: &[f64]) -> Vec<f64> {
    let mut sol = chol_solve(l, rhs);
    let applied = msym.as_mat().matvec(&sol);
    let resid: Vec<f64> = rhs.iter().zip(&applied).map(|(r, a)| r - a).collect();
    let rnorm = dot(&resid, &resid).sqrt();
    if rnorm.is_finite() && rnorm > 0.0 {
        let corr = chol_solve(l, &resid);
        for (s, c) in sol.iter_mut().zip(&corr) {
            *s += c;
        }
    }
    sol
}

// ---------------------------------------------------------------------------
// Directions
// ---------------------------------------------------------------------------

struct Residuals {
    rp: Vec<f64>,
    rd: BlockVec,
    rg: f64,
}

fn residuals(int: &Internal, c: &BlockVec, b: &[f64], p: &PointState) -> Residuals {
    let mut rp = apply_a(int, &p.x);
    for (r, bk) in rp.iter_mut().zip(b) {
        *r -= bk * p.tau;
    }
    let mut rd = apply_at(int, &p.y);
    // rd = -A^T y - s + c tau
    for (slot, m) in rd.m.iter_mut().enumerate() {
        *m = m
            .scaled(-1.0)
            .sub(&p.s.m[slot])
            .add(&c.m[slot].scaled(p.tau));
    }
    for (i, v) in rd.s.iter_mut().enumerate() {
        *v = -*v - p.s.s[i] + c.s[i] * p.tau;
    }
    let rg = c.inner(&p.x) - dot(b, &p.y) + p.kappa;
    Residuals { rp, rd, rg }
}

struct Direction {
    x: BlockVec,
    y: Vec<f64>,
    s: BlockVec,
    tau: f64,
    kappa: f64,
}

/// Scaled-space complementarity targets.
struct CompTarget {
    /// Per PSD slot, the right-hand side of the linearized equation in
    /// scaled space.
    rm: Vec<SymMatrix>,
    rm_scal: Vec<f64>,
    rhs_tk: f64,
}

struct IterWorkspace {
    msch: SymMatrix,
    lsch: Mat,
    wc: BlockVec,
    dy2: Vec<f64>,
    w_at_dy2: BlockVec,
    /// Coefficient of d_tau in the reduced tau equation (provably negative).
    coef: f64,
}

fn prepare_workspace(
    int: &Internal,
    c: &BlockVec,
    b: &[f64],
    p: &PointState,
    sc: &Scaling,
) -> Option<IterWorkspace> {
    let (msch, lsch) = assemble_schur(int, sc)?;
    let wc = w_apply(sc, c);
    let mut rhs2 = apply_a(int, &wc);
    for (r, bk) in rhs2.iter_mut().zip(b) {
        *r += bk;
    }
    let dy2 = if int.rows.is_empty() {
        Vec::new()
    } else {
        schur_solve(&msch, &lsch, &rhs2)
    };
    let w_at_dy2 = w_apply(sc, &apply_at(int, &dy2));
    let coef = c.inner(&w_at_dy2) - c.inner(&wc) - dot(b, &dy2) - p.kappa / p.tau;
    Some(IterWorkspace {
        msch,
        lsch,
        wc,
        dy2,
        w_at_dy2,
        coef,
    })
}

fn solve_direction(
    int: &Internal,
    c: &BlockVec,
    b: &[f64],
    p: &PointState,
    sc: &Scaling,
    ws: &IterWorkspace,
    res: &Residuals,
    eta: f64,
    target: &CompTarget,
) -> Direction {
    // Gterm = R Lyap^{-1}(Rm) R^T per slot; scalar analogue sqrt(w) rm / lam.
    let mut hvec = BlockVec {
        m: Vec::with_capacity(int.psd_dims.len()),
        s: Vec::with_capacity(int.nscal),
    };
    for slot in 0..int.psd_dims.len() {
        let lam = &sc.lambda[slot];
        let d = int.psd_dims[slot];
        let lyap = SymMatrix::from_fn_upper(d, |i, j| {
            2.0 * target.rm[slot].get(i, j) / (lam[i] + lam[j])
        });
        let g = lyap.congruence(&sc.r[slot]);
        // hvec = Gterm - eta * W(r_d)
        let wrd = res.rd.m[slot].congruence(&sc.w[slot]);
        hvec.m.push(g.sub(&wrd.scaled(eta)));
    }
    for i in 0..int.nscal {
        let g = sc.sqrt_w[i] * target.rm_scal[i] / sc.lam_scal[i];
        hvec.s.push(g - eta * sc.w_scal[i] * res.rd.s[i]);
    }

    let mut rhs1 = apply_a(int, &hvec);
    for (r, rpk) in rhs1.iter_mut().zip(&res.rp) {
        *r = -eta * rpk - *r;
    }
    let dy1 = if int.rows.is_empty() {
        Vec::new()
    } else {
        schur_solve(&ws.msch, &ws.lsch, &rhs1)
    };
    let w_at_dy1 = w_apply(sc, &apply_at(int, &dy1));

    let constant = c.inner(&hvec) + c.inner(&w_at_dy1) - dot(b, &dy1)
        + target.rhs_tk / p.tau
        + eta * res.rg;
    let coef = if ws.coef < -f64::MIN_POSITIVE {
        ws.coef
    } else {
        -f64::MIN_POSITIVE
    };
    let dtau = -constant / coef;

    let mut dy = dy1;
    for (d, d2) in dy.iter_mut().zip(&ws.dy2) {
        *d += dtau * d2;
    }

    // ds = -A^T dy + c dtau + eta r_d
    let mut ds = apply_at(int, &dy);
    for (slot, m) in ds.m.iter_mut().enumerate() {
        *m = m
            .scaled(-1.0)
            .add(&c.m[slot].scaled(dtau))
            .add(&res.rd.m[slot].scaled(eta));
    }
    for (i, v) in ds.s.iter_mut().enumerate() {
        *v = -*v + c.s[i] * dtau + eta * res.rd.s[i];
    }

    // dx = hvec + W(A^T dy) - dtau W(c)
    let mut dx = hvec;
    dx.axpy(1.0, &w_at_dy1);
    dx.axpy(dtau, &ws.w_at_dy2);
    dx.axpy(-dtau, &ws.wc);

    let dkappa = (target.rhs_tk - p.kappa * dtau) / p.tau;
    Direction {
        x: dx,
        y: dy,
        s: ds,
        tau: dtau,
        kappa: dkappa,
    }
}

/// Largest alpha in [0, cap] keeping the point in the open cone.
fn max_step(int: &Internal, p: &PointState, sc: &Scaling, d: &Direction, cap: f64) -> f64 {
    let mut alpha = cap;
    for slot in 0..int.psd_dims.len() {
        let lam = &sc.lambda[slot];
        let dim = int.psd_dims[slot];
        let dxt = d.x.m[slot].congruence(&sc.rinv[slot]);
        let dst = d.s.m[slot].congruence(&sc.rt[slot]);
        for mat in [dxt, dst] {
            let b = SymMatrix::from_fn_upper(dim, |i, j| {
                mat.get(i, j) / (lam[i] * lam[j]).sqrt()
            });
            let lmin = b.lambda_min();
            if !lmin.is_finite() {
                return 0.0;
            }
            if lmin < 0.0 {
                alpha = alpha.min(-1.0 / lmin);
            }
        }
    }
    for i in 0..int.nscal {
        if d.x.s[i] < 0.0 {
            alpha = alpha.min(-p.x.s[i] / d.x.s[i]);
        }
        if d.s.s[i] < 0.0 {
            alpha = alpha.min(-p.s.s[i] / d.s.s[i]);
        }
    }
    if d.tau < 0.0 {
        alpha = alpha.min(-p.tau / d.tau);
    }
    if d.kappa < 0.0 {
        alpha = alpha.min(-p.kappa / d.kappa);
    }
    alpha
}

fn step(p: &mut PointState, d: &Direction, alpha: f64) {
    p.x.axpy(alpha, &d.x);
    for (y, dy) in p.y.iter_mut().zip(&d.y) {
        *y += alpha * dy;
    }
    p.s.axpy(alpha, &d.s);
    p.tau += alpha * d.tau;
    p.kappa += alpha * d.kappa;
}

/// Complementarity measure mu at a trial point.
fn mu_at(int: &Internal, p: &PointState, d: &Direction, alpha: f64) -> f64 {
    let mut trial = p.clone();
    step(&mut trial, d, alpha);
    (trial.x.inner(&trial.s) + trial.tau * trial.kappa) / (int.nu + 1.0)
}

// ---------------------------------------------------------------------------
// Main loop
// ---------------------------------------------------------------------------

pub fn solve_sdp(problem: &SdpProblem, opts: &SolveOptions) -> SdpSolution {
    let int = build_internal(problem);
    let b: Vec<f64> = int.rows.iter().map(|r| r.rhs).collect();
    // The objective is normalized to unit max-entry so that scaling it by a
    // positive constant leaves the iterate sequence unchanged; the scale is
    // restored when values and duals are extracted.
    let (c, obj_scale) = {
        let mut c = BlockVec::zeros(&int);
        c.m = int.c_psd.clone();
        c.s = int.c_scal.clone();
        let scale = c.max_abs();
        let scale = if scale > 0.0 && scale.is_finite() {
            scale
        } else {
            1.0
        };
        c.rescale(1.0 / scale);
        (c, scale)
    };
    let bnorm = 1.0 + dot(&b, &b).sqrt();
    let cnorm = 1.0 + c.norm();

    let t0 = 1.0 + b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut p = PointState {
        x: BlockVec::scaled_identity(&int, t0),
        y: vec![0.0; int.rows.len()],
        s: BlockVec::scaled_identity(&int, t0),
        tau: 1.0,
        kappa: t0 * t0,
    };

    let mut best = p.clone();
    let mut best_score = f64::INFINITY;
    let mut best_iters = 0usize;
    let mut converged: Option<(PointState, usize)> = None;
    let mut polish_left = 3usize;
    let mut prev_mu = f64::INFINITY;
    let mut stall_count = 0usize;
    let mut status = SolveStatus::SlowProgress;
    let mut iterations = 0usize;

    for iter in 0..opts.max_iters {
        iterations = iter;
        let res = residuals(&int, &c, &b, &p);
        let mu = (p.x.inner(&p.s) + p.tau * p.kappa) / (int.nu + 1.0);
        if !mu.is_finite() {
            break;
        }

        // Scaled optimality measures.
        let pres = dot(&res.rp, &res.rp).sqrt() / p.tau / bnorm;
        let dres = res.rd.norm() / p.tau / cnorm;
        let pcost = c.inner(&p.x) / p.tau;
        let dcost = dot(&b, &p.y) / p.tau;
        let relgap = (p.x.inner(&p.s) / (p.tau * p.tau)) / pcost.abs().max(1.0);
        let absgap = (pcost - dcost).abs() / (1.0 + pcost.abs() + dcost.abs());

        let score = pres.max(dres) + relgap.min(absgap);
        if score < best_score && p.tau > 1e-12 {
            best_score = score;
            best = p.clone();
            best_iters = iter;
        }

        let within_feas = pres <= opts.feas_tol && dres <= opts.feas_tol;
        if within_feas && (relgap <= opts.gap_tol || absgap <= opts.gap_tol) {
            // Candidate optimum; keep polishing briefly while the gap keeps
            // collapsing fast, which sharpens ill-conditioned instances.
            let replace = match &converged {
                None => true,
                Some((prev, _)) => {
                    let prev_gap = prev.x.inner(&prev.s) / (prev.tau * prev.tau);
                    p.x.inner(&p.s) / (p.tau * p.tau) < prev_gap
                }
            };
            if replace {
                converged = Some((p.clone(), iter));
            }
            let tiny = relgap <= opts.gap_tol / 1000.0;
            let fast = mu < prev_mu / 3.0;
            if tiny || polish_left == 0 || !fast {
                status = SolveStatus::Optimal;
                break;
            }
            polish_left -= 1;
        } else if converged.is_some() {
            // Polishing left the tolerance region; settle for the saved point.
            status = SolveStatus::Optimal;
            break;
        }

        // Farkas-type certificates for infeasibility and unboundedness.
        let by = dot(&b, &p.y);
        if by > 0.0 {
            let mut cert = apply_at(&int, &p.y);
            cert.axpy(1.0, &p.s);
            if cert.norm() <= opts.feas_tol * by {
                status = SolveStatus::Infeasible;
                best = p.clone();
                break;
            }
        }
        let cx = c.inner(&p.x);
        if cx < 0.0 {
            let ax = apply_a(&int, &p.x);
            if dot(&ax, &ax).sqrt() <= opts.feas_tol * (-cx) {
                status = SolveStatus::Unbounded;
                best = p.clone();
                break;
            }
        }

        prev_mu = mu;
        let Some(sc) = compute_scaling(&int, &p) else {
            break;
        };
        let Some(ws) = prepare_workspace(&int, &c, &b, &p, &sc) else {
            break;
        };

        // Predictor: pure Newton step toward complementarity zero.
        let affine_target = CompTarget {
            rm: (0..int.psd_dims.len())
                .map(|slot| {
                    SymMatrix::diag(
                        &sc.lambda[slot].iter().map(|l| -l * l).collect::<Vec<_>>(),
                    )
                })
                .collect(),
            rm_scal: (0..int.nscal).map(|i| -p.x.s[i] * p.s.s[i]).collect(),
            rhs_tk: -p.tau * p.kappa,
        };
        let aff = solve_direction(&int, &c, &b, &p, &sc, &ws, &res, 1.0, &affine_target);
        let alpha_aff = max_step(&int, &p, &sc, &aff, 1.0);
        let mu_aff = mu_at(&int, &p, &aff, alpha_aff);
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        // Corrector: recenter toward sigma*mu with the Mehrotra term.
        let smu = sigma * mu;
        let mut rm = Vec::with_capacity(int.psd_dims.len());
        for slot in 0..int.psd_dims.len() {
            let dxt = aff.x.m[slot].congruence(&sc.rinv[slot]);
            let dst = aff.s.m[slot].congruence(&sc.rt[slot]);
            let prod = dxt.as_mat().matmul(dst.as_mat());
            let cross = SymMatrix::symmetrize(prod);
            let lam = &sc.lambda[slot];
            let d = int.psd_dims[slot];
            rm.push(SymMatrix::from_fn_upper(d, |i, j| {
                let base = if i == j { smu - lam[i] * lam[i] } else { 0.0 };
                base - cross.get(i, j)
            }));
        }
        let target = CompTarget {
            rm,
            rm_scal: (0..int.nscal)
                .map(|i| smu - p.x.s[i] * p.s.s[i] - aff.x.s[i] * aff.s.s[i])
                .collect(),
            rhs_tk: smu - p.tau * p.kappa - aff.tau * aff.kappa,
        };
        let eta = 1.0 - sigma;
        let dir = solve_direction(&int, &c, &b, &p, &sc, &ws, &res, eta, &target);
        let alpha = 0.99 * max_step(&int, &p, &sc, &dir, 1.0 / 0.99);
        let alpha = alpha.min(1.0);

        if alpha < 1e-7 {
            stall_count += 1;
            if stall_count >= 2 {
                break;
            }
        } else {
            stall_count = 0;
        }
        step(&mut p, &dir, alpha);
        iterations = iter + 1;
    }

    let (final_point, final_iters) = match (&status, converged) {
        (SolveStatus::Optimal, Some((point, it))) => (point, it),
        (SolveStatus::Infeasible | SolveStatus::Unbounded, _) => (best.clone(), iterations),
        (_, _) => {
            // Steps shrink below useful size once the Schur system's
            // conditioning hits the floating-point floor, which can happen a
            // factor of a few short of the target gap. An iterate within ten
            // times the tolerances is converged for every downstream purpose,
            // so classify it as such instead of reporting a stall.
            if best.tau > 1e-12 {
                let res = residuals(&int, &c, &b, &best);
                let pres = dot(&res.rp, &res.rp).sqrt() / best.tau / bnorm;
                let dres = res.rd.norm() / best.tau / cnorm;
                let pcost = c.inner(&best.x) / best.tau;
                let dcost = dot(&b, &best.y) / best.tau;
                let relgap =
                    (best.x.inner(&best.s) / (best.tau * best.tau)) / pcost.abs().max(1.0);
                let absgap = (pcost - dcost).abs() / (1.0 + pcost.abs() + dcost.abs());
                if pres <= 10.0 * opts.feas_tol
                    && dres <= 10.0 * opts.feas_tol
                    && (relgap <= 10.0 * opts.gap_tol || absgap <= 10.0 * opts.gap_tol)
                {
                    status = SolveStatus::Optimal;
                }
            }
            iterations = best_iters.max(iterations);
            (best, iterations)
        }
    };
    extract(
        problem,
        &int,
        &c,
        &b,
        obj_scale,
        final_point,
        status,
        final_iters,
    )
}

#[allow(clippy::too_many_arguments)]
fn extract(
    problem: &SdpProblem,
    int: &Internal,
    c: &BlockVec,
    b: &[f64],
    obj_scale: f64,
    p: PointState,
    status: SolveStatus,
    iterations: usize,
) -> SdpSolution {
    let t = if p.tau > 1e-12 { p.tau } else { 1.0 };
    let primal_blocks = int
        .slots
        .iter()
        .map(|slot| match slot {
            Slot::Psd(idx) => PrimalBlock::Psd(p.x.m[*idx].scaled(1.0 / t)),
            Slot::Scal(idx) => PrimalBlock::Scalar(p.x.s[*idx] / t),
        })
        .collect();
    // Duals are reported for the caller's objective, so the internal
    // normalization is undone here.
    let dual_rows: Vec<f64> = p.y.iter().map(|yk| -yk * obj_scale / t).collect();
    let mut dual_by_label = BTreeMap::new();
    for (label, target) in &problem.labels {
        let value = match target {
            LabelTarget::Row(k) => DualValue::Scalar(dual_rows[*k]),
            LabelTarget::Group { rows, dim, .. } => DualValue::Mat(
                SdpProblem::assemble_group_dual(rows.clone(), *dim, &dual_rows),
            ),
        };
        dual_by_label.insert(label.clone(), value);
    }
    let primal_value = -c.inner(&p.x) * obj_scale / t;
    let dual_value = -dot(b, &p.y) * obj_scale / t;
    SdpSolution {
        primal_blocks,
        dual_rows,
        dual_by_label,
        primal_value,
        dual_value,
        status,
        iterations,
    }
}

impl SdpSolution {
    /// The PSD matrix of a block, panicking when the block is scalar.
    pub fn psd_block(&self, id: super::BlockId) -> &SymMatrix {
        match &self.primal_blocks[id.0] {
            PrimalBlock::Psd(m) => m,
            PrimalBlock::Scalar(_) => panic!("block {} is scalar, not PSD", id.0),
        }
    }

    /// The scalar value of a block, panicking when the block is PSD.
    pub fn scalar_block(&self, id: super::BlockId) -> f64 {
        match &self.primal_blocks[id.0] {
            PrimalBlock::Scalar(v) => *v,
            PrimalBlock::Psd(_) => panic!("block {} is PSD, not scalar", id.0),
        }
    }

    /// Dual scalar for a labeled plain row.
    pub fn dual_scalar(&self, label: &str) -> Option<f64> {
        match self.dual_by_label.get(label)? {
            DualValue::Scalar(v) => Some(*v),
            DualValue::Mat(_) => None,
        }
    }

    /// Dual matrix for a labeled LMI group.
    pub fn dual_matrix(&self, label: &str) -> Option<&SymMatrix> {
        match self.dual_by_label.get(label)? {
            DualValue::Mat(m) => Some(m),
            DualValue::Scalar(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::problem::trace_coeff;

    #[test]
    fn one_dimensional_lp() {
        let mut prob = SdpProblem::new();
        let x = prob.add_nonneg_scalar();
        prob.set_objective(x, Coeff::Scalar(1.0));
        prob.add_constraint(Some("cap"), vec![(x, Coeff::Scalar(1.0))], Sense::Le, 1.0);
        let sol = solve_sdp(&prob, &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_value - 1.0).abs() < 1e-7, "value {}", sol.primal_value);
        assert!((sol.scalar_block(x) - 1.0).abs() < 1e-6);
        let dual = sol.dual_scalar("cap").unwrap();
        assert!((dual - 1.0).abs() < 1e-6, "dual {dual}");
    }

    #[test]
    fn psd_trace_cap() {
        // maximize <I, X> s.t. tr X <= 3, X psd (2x2): value 3.
        let mut prob = SdpProblem::new();
        let x = prob.add_psd_block(2);
        prob.set_objective(x, trace_coeff(2, 1.0));
        prob.add_constraint(Some("tr"), vec![(x, trace_coeff(2, 1.0))], Sense::Le, 3.0);
        let sol = solve_sdp(&prob, &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_value - 3.0).abs() < 1e-7);
        assert!((sol.dual_scalar("tr").unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn lmi_pins_matrix_entry() {
        // maximize x11 subject to [[1 - x11, 0], [0, 1]] >= 0 via LMI,
        // X psd: optimum x11 = 1.
        let mut prob = SdpProblem::new();
        let x = prob.add_psd_block(2);
        let mut obj = SymMatrix::zeros(2);
        obj.set(0, 0, 1.0);
        prob.set_objective(x, Coeff::Psd(obj.clone()));
        let mut lmi = super::super::LmiBuilder::new(2);
        lmi.constant(0, 0, 1.0);
        lmi.constant(1, 1, 1.0);
        lmi.term(0, 0, x, Coeff::Psd(obj.scaled(-1.0)));
        prob.add_lmi_group("box", lmi);
        // Bound the otherwise-free trailing diagonal entry so the optimal
        // face is compact.
        prob.add_constraint(Some("tr"), vec![(x, trace_coeff(2, 1.0))], Sense::Le, 2.0);
        let sol = solve_sdp(&prob, &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_value - 1.0).abs() < 1e-6, "value {}", sol.primal_value);
        let w = sol.dual_matrix("box").unwrap();
        assert!(w.lambda_min() > -1e-8, "dual matrix must be PSD");
    }

    #[test]
    fn detects_infeasible() {
        // x >= 0 with x <= -1.
        let mut prob = SdpProblem::new();
        let x = prob.add_nonneg_scalar();
        prob.set_objective(x, Coeff::Scalar(0.0));
        prob.add_constraint(None, vec![(x, Coeff::Scalar(1.0))], Sense::Le, -1.0);
        let sol = solve_sdp(&prob, &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        // maximize x with only a lower bound: -x <= -1.
        let mut prob = SdpProblem::new();
        let x = prob.add_nonneg_scalar();
        prob.set_objective(x, Coeff::Scalar(1.0));
        prob.add_constraint(None, vec![(x, Coeff::Scalar(-1.0))], Sense::Le, -1.0);
        let sol = solve_sdp(&prob, &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Unbounded);
    }

    #[test]
    fn deterministic_resolve() {
        let mut prob = SdpProblem::new();
        let x = prob.add_psd_block(3);
        prob.set_objective(x, trace_coeff(3, 1.0));
        prob.add_constraint(Some("tr"), vec![(x, trace_coeff(3, 1.0))], Sense::Le, 2.0);
        let mut off = SymMatrix::zeros(3);
        off.set(0, 1, 0.5);
        prob.add_constraint(Some("off"), vec![(x, Coeff::Psd(off))], Sense::Eq, 0.25);
        let a = solve_sdp(&prob, &SolveOptions::default());
        let b = solve_sdp(&prob, &SolveOptions::default());
        assert_eq!(a.primal_value.to_bits(), b.primal_value.to_bits());
        let (ma, mb) = (a.psd_block(x), b.psd_block(x));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(ma.get(i, j).to_bits(), mb.get(i, j).to_bits());
            }
        }
    }
}
