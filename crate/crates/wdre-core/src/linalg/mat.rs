//! Dense row-major rectangular matrices and small vector helpers.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::de::{self, Deserializer};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use super::LinalgError;
use crate::scalar::Scalar;

/// Dense row-major matrix.
///
/// Serialization uses nested arrays (one inner array per row), which is also
/// the on-disk representation of observation matrices in instance files.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<S> {
    nrows: usize,
    ncols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    /// Matrix of zeros.
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        assert!(nrows > 0 && ncols > 0, "matrix dimensions must be positive");
        Mat {
            nrows,
            ncols,
            data: vec![S::zero(); nrows * ncols],
        }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    /// Builds a matrix entry by entry.
    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut m = Self::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from row slices; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self, LinalgError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(LinalgError::DimensionMismatch {
                context: "Mat::from_rows",
                expected: "at least one row and one column".into(),
                found: "empty input".into(),
            });
        }
        let ncols = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != ncols {
                return Err(LinalgError::DimensionMismatch {
                    context: "Mat::from_rows",
                    expected: format!("{ncols} columns"),
                    found: format!("row {i} has {} entries", r.len()),
                });
            }
        }
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for r in rows {
            data.extend_from_slice(r);
        }
        Ok(Mat {
            nrows: rows.len(),
            ncols,
            data,
        })
    }

    /// Column vector (n x 1) from a slice.
    pub fn column(v: &[S]) -> Self {
        Self::from_fn(v.len(), 1, |i, _| v[i])
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    /// Borrow of row `i` as a contiguous slice.
    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    /// Copy of column `j`.
    pub fn col(&self, j: usize) -> Vec<S> {
        (0..self.nrows).map(|i| self[(i, j)]).collect()
    }

    /// Raw row-major storage.
    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.ncols, self.nrows, |i, j| self[(j, i)])
    }

    /// Matrix product `self * rhs`.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(
            self.ncols, rhs.nrows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.nrows, self.ncols, rhs.nrows, rhs.ncols
        );
        let mut out = Self::zeros(self.nrows, rhs.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let aik = self[(i, k)];
                if aik == S::zero() {
                    continue;
                }
                let rrow = rhs.row(k);
                let orow = &mut out.data[i * rhs.ncols..(i + 1) * rhs.ncols];
                for (o, &r) in orow.iter_mut().zip(rrow) {
                    *o += aik * r;
                }
            }
        }
        out
    }

    /// Matrix-vector product `self * v`.
    pub fn matvec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.ncols, v.len(), "matvec shape mismatch");
        (0..self.nrows).map(|i| dot(self.row(i), v)).collect()
    }

    /// Transposed matrix-vector product `self^T * v`.
    pub fn tr_matvec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.nrows, v.len(), "tr_matvec shape mismatch");
        let mut out = vec![S::zero(); self.ncols];
        for i in 0..self.nrows {
            let vi = v[i];
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    /// Entrywise sum.
    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (rhs.nrows, rhs.ncols));
        let mut out = self.clone();
        for (o, &r) in out.data.iter_mut().zip(&rhs.data) {
            *o += r;
        }
        out
    }

    /// Entrywise difference.
    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (rhs.nrows, rhs.ncols));
        let mut out = self.clone();
        for (o, &r) in out.data.iter_mut().zip(&rhs.data) {
            *o -= r;
        }
        out
    }

    /// Scalar multiple.
    pub fn scaled(&self, c: S) -> Self {
        let mut out = self.clone();
        for o in out.data.iter_mut() {
            *o *= c;
        }
        out
    }

    pub fn frobenius_norm(&self) -> S {
        self.data.iter().map(|&x| x * x).sum::<S>().sqrt()
    }

    pub fn max_abs(&self) -> S {
        self.data
            .iter()
            .fold(S::zero(), |acc, &x| acc.max(x.abs()))
    }

    /// Rows as owned vectors, the layout used by the JSON format.
    pub fn to_rows(&self) -> Vec<Vec<S>> {
        (0..self.nrows).map(|i| self.row(i).to_vec()).collect()
    }
}

impl<S> Index<(usize, usize)> for Mat<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        debug_assert!(i < self.nrows && j < self.ncols);
        &self.data[i * self.ncols + j]
    }
}

impl<S> IndexMut<(usize, usize)> for Mat<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        debug_assert!(i < self.nrows && j < self.ncols);
        &mut self.data[i * self.ncols + j]
    }
}

impl<S: Scalar> fmt::Display for Mat<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.nrows {
            write!(f, "[")?;
            for j in 0..self.ncols {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{:.6}", self[(i, j)])?;
            }
            writeln!(f, "]")?;
        }
        Ok(())
    }
}

impl<S: Scalar + Serialize> Serialize for Mat<S> {
    fn serialize<Ser: Serializer>(&self, serializer: Ser) -> Result<Ser::Ok, Ser::Error> {
        let mut seq = serializer.serialize_seq(Some(self.nrows))?;
        for i in 0..self.nrows {
            seq.serialize_element(self.row(i))?;
        }
        seq.end()
    }
}

impl<'de, S: Scalar + Deserialize<'de>> Deserialize<'de> for Mat<S> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows: Vec<Vec<S>> = Vec::deserialize(deserializer)?;
        Mat::from_rows(&rows).map_err(de::Error::custom)
    }
}

/// Euclidean inner product of two equally long slices.
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Euclidean norm of a slice.
pub fn norm2<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}
