//! Sparse and dense linear-algebra helpers shared by the solver modules.
//!
//! Sparse matrices are stored in a plain CSR layout owned by this crate;
//! factorizations are delegated to `faer` (sparse supernodal/simplicial
//! Cholesky for subdomain interior blocks, dense Cholesky for Schur and
//! coarse blocks).

use std::ops::Range;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, MatMut, Side};

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indptr[r + 1] += 1;
                indices.push(c);
                values.push(v);
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(m: &Mat<f64>) -> Self {
        let mut t = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    /// `y += alpha * A x`
    pub fn mul_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[p] * x[self.indices[p]];
            }
            *yr += alpha * acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_add(1.0, x, &mut y);
        y
    }

    /// Extracts the contiguous sub-block `rows × cols`.
    pub fn block(&self, rows: Range<usize>, cols: Range<usize>) -> CsrMatrix {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for r in rows.clone() {
            for (c, v) in self.row(r) {
                if cols.contains(&c) {
                    indices.push(c - cols.start);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            nrows: rows.len(),
            ncols: cols.len(),
            indptr,
            indices,
            values,
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        CsrMatrix::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().map(|(r, c, v)| (c, r, v)).collect(),
        )
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let t: Vec<_> = self.triplets().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t)
            .map_err(|e| Error::factorization("sparse matrix conversion", e))
    }

    /// `Y = A X` for a dense column-major `X`.
    pub fn mul_dense(&self, x: &Mat<f64>) -> Mat<f64> {
        assert_eq!(x.nrows(), self.ncols);
        let mut y = Mat::zeros(self.nrows, x.ncols());
        for j in 0..x.ncols() {
            let xc = x.col_as_slice(j);
            let yc = y.col_as_slice_mut(j);
            self.mul_add(1.0, xc, yc);
        }
        y
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.nrows == self.ncols
            && self
                .triplets()
                .all(|(r, c, v)| (v - self.get(c, r)).abs() <= tol * v.abs().max(1.0))
    }
}

/// Sparse symmetric positive definite factorization `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct SparseCholesky {
    n: usize,
    llt: Option<faer::sparse::linalg::solvers::Llt<usize, f64>>,
}

impl SparseCholesky {
    pub fn factor(a: &CsrMatrix, what: &str) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{what}: {}x{} is not square",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.nrows() == 0 {
            return Ok(Self { n: 0, llt: None });
        }
        let llt = a
            .to_faer()?
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::factorization(what, e))?;
        Ok(Self {
            n: a.nrows(),
            llt: Some(llt),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        if let Some(llt) = &self.llt {
            llt.solve_in_place(MatMut::from_column_major_slice_mut(x, self.n, 1));
        }
    }

    pub fn solve_mat_in_place(&self, x: &mut Mat<f64>) {
        assert_eq!(x.nrows(), self.n);
        if let Some(llt) = &self.llt {
            llt.solve_in_place(x.as_mut());
        }
    }
}

/// Dense symmetric positive definite factorization with an optional
/// diagonal shift applied when the plain factorization breaks down.
#[derive(Debug, Clone)]
pub struct DenseCholesky {
    n: usize,
    llt: Option<faer::linalg::solvers::Llt<f64>>,
    shift: f64,
}

impl DenseCholesky {
    pub fn factor(a: &Mat<f64>, what: &str) -> Result<Self> {
        Self::factor_shifted(a, 0.0, what)
    }

    fn factor_shifted(a: &Mat<f64>, shift: f64, what: &str) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{what}: {}x{} is not square",
                a.nrows(),
                a.ncols()
            )));
        }
        if n == 0 {
            return Ok(Self {
                n,
                llt: None,
                shift,
            });
        }
        let llt = if shift == 0.0 {
            a.llt(Side::Lower)
        } else {
            let mut b = a.clone();
            for i in 0..n {
                b[(i, i)] += shift;
            }
            b.llt(Side::Lower)
        }
        .map_err(|e| Error::factorization(what, e))?;
        Ok(Self {
            n,
            llt: Some(llt),
            shift,
        })
    }

    /// Factors `a`; on breakdown retries once with `rel_shift · mean(diag)`
    /// added to the diagonal.
    pub fn factor_regularized(a: &Mat<f64>, rel_shift: f64, what: &str) -> Result<Self> {
        match Self::factor(a, what) {
            Ok(f) => Ok(f),
            Err(Error::Factorization { .. }) => {
                let n = a.nrows();
                let mean = (0..n).map(|i| a[(i, i)]).sum::<f64>() / n as f64;
                let shift = rel_shift * mean.abs().max(f64::MIN_POSITIVE);
                log::warn!("{what}: factorization broke down, regularizing with diagonal shift {shift:e}");
                Self::factor_shifted(a, shift, what)
            }
            Err(e) => Err(e),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Diagonal shift that was needed to factor the matrix (0 if none).
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        if let Some(llt) = &self.llt {
            llt.solve_in_place(MatMut::from_column_major_slice_mut(x, self.n, 1));
        }
    }

    pub fn solve_mat_in_place(&self, x: &mut Mat<f64>) {
        assert_eq!(x.nrows(), self.n);
        if let Some(llt) = &self.llt {
            llt.solve_in_place(x.as_mut());
        }
    }
}

/// `y = M x` for a dense matrix.
pub fn dense_mul_vec(m: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; m.nrows()];
    dense_mul_add(m, 1.0, x, &mut y);
    y
}

/// `y += alpha M x` for a dense matrix.
pub fn dense_mul_add(m: &Mat<f64>, alpha: f64, x: &[f64], y: &mut [f64]) {
    assert_eq!(x.len(), m.ncols());
    assert_eq!(y.len(), m.nrows());
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        let a = alpha * xj;
        for (yi, &mij) in y.iter_mut().zip(m.col_as_slice(j)) {
            *yi += a * mij;
        }
    }
}

/// `y += alpha Mᵀ x` for a dense matrix.
pub fn dense_tmul_add(m: &Mat<f64>, alpha: f64, x: &[f64], y: &mut [f64]) {
    assert_eq!(x.len(), m.nrows());
    assert_eq!(y.len(), m.ncols());
    for (j, yj) in y.iter_mut().enumerate() {
        *yj += alpha * dot(m.col_as_slice(j), x);
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Picks the `rows × cols` sub-matrix by index lists.
pub fn dense_select(m: &Mat<f64>, rows: &[usize], cols: &[usize]) -> Mat<f64> {
    Mat::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn max_abs_asymmetry(m: &Mat<f64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}
