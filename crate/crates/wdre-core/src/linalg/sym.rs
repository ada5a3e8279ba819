//! Symmetric matrices with enforced symmetry and spectral operations.

use std::ops::Index;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

use super::mat::{dot, Mat};
use super::LinalgError;
use crate::scalar::Scalar;

/// Maximum number of Jacobi sweeps before the eigensolver accepts the
/// current iterate. Cyclic Jacobi converges quadratically; on the matrix
/// orders handled here (up to a few tens) convergence takes well under ten
/// sweeps, so this cap exists only to bound pathological inputs.
const MAX_JACOBI_SWEEPS: usize = 64;

/// Dense symmetric matrix.
///
/// Construction through [`SymMatrix::from_mat`] checks that the input is
/// symmetric up to a relative tolerance and then stores the exactly
/// symmetrized average `(M + M^T) / 2`, so downstream spectral code can rely
/// on bitwise symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<S> {
    mat: Mat<S>,
}

/// Eigendecomposition of a symmetric matrix.
///
/// Eigenvalues are sorted ascending; `vectors` holds the matching
/// orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymEigen<S> {
    pub values: Vec<S>,
    pub vectors: Mat<S>,
}

impl<S: Scalar> SymMatrix<S> {
    /// Validates symmetry of `m` and stores the symmetrized matrix.
    ///
    /// The asymmetry bound is `sym_tol * (1 + max|m_ij|)`, so well-scaled
    /// matrices are checked near machine precision while large-magnitude data
    /// gets proportional slack.
    pub fn from_mat(m: Mat<S>) -> Result<Self, LinalgError> {
        if !m.is_square() {
            return Err(LinalgError::DimensionMismatch {
                context: "SymMatrix::from_mat",
                expected: "square matrix".into(),
                found: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        let n = m.nrows();
        let mut max_asym = S::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                max_asym = max_asym.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        let tol = S::sym_tol() * (S::one() + m.max_abs());
        if max_asym > tol {
            return Err(LinalgError::NotSymmetric {
                max_asymmetry: max_asym.as_f64(),
                tolerance: tol.as_f64(),
            });
        }
        Ok(Self::symmetrize(m))
    }

    /// Averages `m` with its transpose without a symmetry check. Used
    /// internally where near-symmetry is guaranteed by construction.
    pub(crate) fn symmetrize(m: Mat<S>) -> Self {
        assert!(m.is_square());
        let n = m.nrows();
        let half = S::real(0.5);
        let mut out = m;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = (out[(i, j)] + out[(j, i)]) * half;
                out[(i, j)] = avg;
                out[(j, i)] = avg;
            }
        }
        SymMatrix { mat: out }
    }

    /// Builds from the upper triangle: `f(i, j)` is called for `i <= j`.
    pub fn from_fn_upper(dim: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut m = Mat::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix { mat: m }
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            mat: Mat::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix {
            mat: Mat::identity(dim),
        }
    }

    pub fn diag(d: &[S]) -> Self {
        Self::from_fn_upper(d.len(), |i, j| if i == j { d[i] } else { S::zero() })
    }

    /// Rank-one matrix `v v^T`.
    pub fn outer(v: &[S]) -> Self {
        Self::from_fn_upper(v.len(), |i, j| v[i] * v[j])
    }

    /// Symmetrized outer product `(a b^T + b a^T) / 2`.
    pub fn sym_outer(a: &[S], b: &[S]) -> Self {
        assert_eq!(a.len(), b.len());
        let half = S::real(0.5);
        Self::from_fn_upper(a.len(), |i, j| (a[i] * b[j] + a[j] * b[i]) * half)
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.mat[(i, j)]
    }

    /// Sets the symmetric pair of entries `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.mat[(i, j)] = v;
        self.mat[(j, i)] = v;
    }

    pub fn as_mat(&self) -> &Mat<S> {
        &self.mat
    }

    pub fn into_mat(self) -> Mat<S> {
        self.mat
    }

    pub fn add(&self, rhs: &Self) -> Self {
        SymMatrix {
            mat: self.mat.add(&rhs.mat),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        SymMatrix {
            mat: self.mat.sub(&rhs.mat),
        }
    }

    pub fn scaled(&self, c: S) -> Self {
        SymMatrix {
            mat: self.mat.scaled(c),
        }
    }

    pub fn trace(&self) -> S {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> S {
        self.mat.frobenius_norm()
    }

    pub fn max_abs(&self) -> S {
        self.mat.max_abs()
    }

    /// Frobenius inner product `<self, rhs> = trace(self * rhs)`.
    pub fn inner(&self, rhs: &Self) -> S {
        assert_eq!(self.dim(), rhs.dim());
        dot(self.mat.as_slice(), rhs.mat.as_slice())
    }

    /// Quadratic form `v^T M v`.
    pub fn quad_form(&self, v: &[S]) -> S {
        dot(&self.mat.matvec(v), v)
    }

    /// Congruence transform `B * M * B^T`, symmetric by construction.
    pub fn congruence(&self, b: &Mat<S>) -> SymMatrix<S> {
        assert_eq!(b.ncols(), self.dim(), "congruence shape mismatch");
        let t = b.matmul(&self.mat);
        SymMatrix::symmetrize(t.matmul(&b.transpose()))
    }

    /// Assembles a symmetric matrix from a square grid of blocks.
    ///
    /// `blocks[r][c]` must be `None` (zero block) or a matrix matching the
    /// row/column partition sizes `parts`. Only the upper block triangle is
    /// read; the lower one is filled by transposition.
    pub fn from_blocks(parts: &[usize], blocks: &[Vec<Option<Mat<S>>>]) -> Self {
        let dim: usize = parts.iter().sum();
        let offsets: Vec<usize> = parts
            .iter()
            .scan(0, |acc, &p| {
                let o = *acc;
                *acc += p;
                Some(o)
            })
            .collect();
        let mut m = Mat::zeros(dim, dim);
        for (r, row) in blocks.iter().enumerate() {
            for (c, blk) in row.iter().enumerate() {
                if c < r {
                    continue;
                }
                if let Some(b) = blk {
                    assert_eq!((b.nrows(), b.ncols()), (parts[r], parts[c]));
                    for i in 0..parts[r] {
                        for j in 0..parts[c] {
                            m[(offsets[r] + i, offsets[c] + j)] = b[(i, j)];
                            m[(offsets[c] + j, offsets[r] + i)] = b[(i, j)];
                        }
                    }
                }
            }
        }
        SymMatrix::symmetrize(m)
    }

    /// Extracts the rectangular sub-block with rows `r0..r0+nr` and columns
    /// `c0..c0+nc`.
    pub fn block(&self, r0: usize, nr: usize, c0: usize, nc: usize) -> Mat<S> {
        Mat::from_fn(nr, nc, |i, j| self.get(r0 + i, c0 + j))
    }

    /// Eigendecomposition by cyclic Jacobi rotations.
    ///
    /// Deterministic: identical input bits produce identical output bits.
    pub fn sym_eigen(&self) -> SymEigen<S> {
        let n = self.dim();
        let mut a = self.mat.clone();
        let mut v = Mat::identity(n);
        if n > 1 {
            let scale = self.frobenius_norm().max(S::one());
            let tol = S::jacobi_tol() * scale;
            for _sweep in 0..MAX_JACOBI_SWEEPS {
                let mut off = S::zero();
                for i in 0..n {
                    for j in (i + 1)..n {
                        off += a[(i, j)] * a[(i, j)];
                    }
                }
                if (off + off).sqrt() <= tol {
                    break;
                }
                for p in 0..n - 1 {
                    for q in (p + 1)..n {
                        jacobi_rotate(&mut a, &mut v, p, q);
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            a[(i, i)]
                .partial_cmp(&a[(j, j)])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let values = order.iter().map(|&i| a[(i, i)]).collect();
        let vectors = Mat::from_fn(n, n, |i, j| v[(i, order[j])]);
        SymEigen { values, vectors }
    }

    fn map_eigenvalues(eig: &SymEigen<S>, f: impl Fn(S) -> S) -> Self {
        let n = eig.values.len();
        let mut m = Mat::zeros(n, n);
        for (k, &lam) in eig.values.iter().enumerate() {
            let g = f(lam);
            if g == S::zero() {
                continue;
            }
            let col = eig.vectors.col(k);
            for i in 0..n {
                let gi = g * col[i];
                for j in i..n {
                    let add = gi * col[j];
                    m[(i, j)] += add;
                    if j > i {
                        m[(j, i)] += add;
                    }
                }
            }
        }
        SymMatrix { mat: m }
    }

    /// Unique positive semidefinite square root.
    ///
    /// Eigenvalues within `psd_eig_tol * (1 + lambda_max)` below zero are
    /// treated as rounding noise and clamped to zero; anything lower is a
    /// genuine violation and yields [`LinalgError::NotPsd`].
    pub fn psd_sqrt(&self) -> Result<Self, LinalgError> {
        let eig = self.sym_eigen();
        let lam_min = eig.values[0];
        let lam_max = *eig.values.last().unwrap();
        let tol = S::psd_eig_tol() * (S::one() + lam_max);
        if lam_min < -tol {
            return Err(LinalgError::NotPsd {
                min_eigenvalue: lam_min.as_f64(),
                tolerance: tol.as_f64(),
            });
        }
        Ok(Self::map_eigenvalues(&eig, |lam| {
            lam.max(S::zero()).sqrt()
        }))
    }

    /// Moore-Penrose pseudo-inverse through the eigendecomposition.
    ///
    /// Eigenvalues with `|lambda| <= rtol * max|lambda|` are treated as zero.
    /// `None` selects the default cutoff [`Scalar::pinv_rtol`]. The zero
    /// matrix maps to the zero matrix.
    pub fn pseudo_inverse(&self, rtol: Option<S>) -> Self {
        let rtol = rtol.unwrap_or_else(S::pinv_rtol);
        let eig = self.sym_eigen();
        let lam_abs_max = eig
            .values
            .iter()
            .fold(S::zero(), |acc, &l| acc.max(l.abs()));
        let cutoff = rtol * lam_abs_max;
        Self::map_eigenvalues(&eig, |lam| {
            if lam.abs() > cutoff {
                S::one() / lam
            } else {
                S::zero()
            }
        })
    }

    /// Largest eigenvalue: the margin by which the matrix fails (positive)
    /// or clears (negative) a negative semidefiniteness test. Callers
    /// declare the matrix NSD when the margin is at most their tolerance,
    /// typically `nsd_tol * (1 + frobenius_norm)`.
    pub fn nsd_margin(&self) -> S {
        *self.sym_eigen().values.last().unwrap()
    }

    pub fn lambda_min(&self) -> S {
        self.sym_eigen().values[0]
    }

    /// Cholesky factorization `M = L L^T` with `L` lower triangular.
    ///
    /// Fails on the first nonpositive pivot; no regularization is applied
    /// here, callers that want jitter add it themselves.
    pub fn cholesky(&self) -> Result<Mat<S>, LinalgError> {
        let n = self.dim();
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= S::zero() {
                return Err(LinalgError::NotPositiveDefinite { index: j });
            }
            let dj = d.sqrt();
            l[(j, j)] = dj;
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / dj;
            }
        }
        Ok(l)
    }
}

/// One symmetric Jacobi rotation zeroing the `(p, q)` entry of `a`,
/// accumulated into the eigenvector matrix `v`.
fn jacobi_rotate<S: Scalar>(a: &mut Mat<S>, v: &mut Mat<S>, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == S::zero() {
        return;
    }
    let theta = (a[(q, q)] - a[(p, p)]) / (S::real(2.0) * apq);
    // Stable tangent of the rotation angle: smaller root of t^2 + 2 theta t - 1.
    let t = if theta >= S::zero() {
        S::one() / (theta + (S::one() + theta * theta).sqrt())
    } else {
        -S::one() / (-theta + (S::one() + theta * theta).sqrt())
    };
    let c = S::one() / (S::one() + t * t).sqrt();
    let s = t * c;
    let n = a.nrows();

    let app = a[(p, p)];
    let aqq = a[(q, q)];
    a[(p, p)] = app - t * apq;
    a[(q, q)] = aqq + t * apq;
    a[(p, q)] = S::zero();
    a[(q, p)] = S::zero();
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(p, k)] = a[(k, p)];
        a[(k, q)] = s * akp + c * akq;
        a[(q, k)] = a[(k, q)];
    }
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

impl<S> Index<(usize, usize)> for SymMatrix<S> {
    type Output = S;
    fn index(&self, idx: (usize, usize)) -> &S {
        &self.mat[idx]
    }
}

impl<S: Scalar + Serialize> Serialize for SymMatrix<S> {
    fn serialize<Ser: Serializer>(&self, serializer: Ser) -> Result<Ser::Ok, Ser::Error> {
        self.mat.serialize(serializer)
    }
}

impl<'de, S: Scalar + Deserialize<'de>> Deserialize<'de> for SymMatrix<S> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let mat = Mat::deserialize(deserializer)?;
        SymMatrix::from_mat(mat).map_err(de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn symmetry_check_rejects_asymmetric_input() {
        let m = Mat::from_rows(&[vec![1.0, 2.0], vec![2.1, 1.0]]).unwrap();
        assert!(matches!(
            SymMatrix::from_mat(m),
            Err(LinalgError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn symmetrization_averages_tiny_asymmetry() {
        let eps = 1e-14;
        let m = Mat::from_rows(&[vec![1.0, 2.0 + eps], vec![2.0 - eps, 1.0]]).unwrap();
        let s = SymMatrix::from_mat(m).unwrap();
        assert_eq!(s.get(0, 1), s.get(1, 0));
        assert!(approx(s.get(0, 1), 2.0, 1e-13));
    }

    #[test]
    fn eigen_recovers_diagonal() {
        let s = SymMatrix::diag(&[3.0, -1.0, 2.0]);
        let eig = s.sym_eigen();
        assert!(approx(eig.values[0], -1.0, 1e-12));
        assert!(approx(eig.values[1], 2.0, 1e-12));
        assert!(approx(eig.values[2], 3.0, 1e-12));
    }

    #[test]
    fn eigen_reconstructs_random_symmetric() {
        // Fixed pseudo-random entries; checks V diag(w) V^T = M.
        let mut seed = 0x243F6A8885A308D3u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let m = SymMatrix::from_fn_upper(6, |_, _| next());
        let eig = m.sym_eigen();
        let d = SymMatrix::diag(&eig.values);
        let rec = d.congruence(&eig.vectors);
        assert!(rec.sub(&m).frobenius_norm() < 1e-12 * (1.0 + m.frobenius_norm()));
        // Orthonormality of the eigenvector columns.
        let vtv = SymMatrix::identity(6).congruence(&eig.vectors.transpose());
        assert!(vtv.sub(&SymMatrix::identity(6)).frobenius_norm() < 1e-13);
    }

    #[test]
    fn cholesky_round_trip() {
        let b = Mat::from_rows(&[vec![2.0, 0.0], vec![1.0, 1.5]]).unwrap();
        let m = SymMatrix::symmetrize(b.matmul(&b.transpose()));
        let l = m.cholesky().unwrap();
        let ll = SymMatrix::symmetrize(l.matmul(&l.transpose()));
        assert!(ll.sub(&m).frobenius_norm() < 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = SymMatrix::diag(&[1.0, -1.0]);
        assert!(matches!(
            m.cholesky(),
            Err(LinalgError::NotPositiveDefinite { index: 1 })
        ));
    }

    #[test]
    fn block_assembly_and_extraction() {
        let a = Mat::identity(2);
        let b = Mat::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        let c = Mat::from_rows(&[vec![5.0]]).unwrap();
        let m = SymMatrix::from_blocks(
            &[2, 1],
            &[vec![Some(a), Some(b)], vec![None, Some(c)]],
        );
        assert_eq!(m.get(0, 2), 1.0);
        assert_eq!(m.get(2, 1), 2.0);
        assert_eq!(m.get(2, 2), 5.0);
        let back = m.block(0, 2, 2, 1);
        assert_eq!(back[(1, 0)], 2.0);
    }

    #[test]
    fn psd_sqrt_at_f32() {
        let m: SymMatrix<f32> = SymMatrix::diag(&[4.0, 9.0]);
        let r = m.psd_sqrt().unwrap();
        assert!((r.get(0, 0) - 2.0).abs() < 1e-4);
        assert!((r.get(1, 1) - 3.0).abs() < 1e-4);
    }
}
