//! Dense row-major matrices and the handful of kernels the solvers need.
//!
//! Products are plain sequential loops with a fixed summation order so that
//! results never depend on thread count. Spectral quantities are delegated to
//! `nalgebra` decompositions.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Anything that can apply `A` and `Aᵀ` to a vector.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `out = A x`
    fn apply(&self, x: &[f64], out: &mut [f64]);
    /// `out = Aᵀ r`
    fn apply_transpose(&self, r: &[f64], out: &mut [f64]);

    /// `‖A‖²_{2→2}`, used as the Lipschitz constant of the least-squares gradient.
    fn spectral_norm_sq(&self) -> Result<f64> {
        let est = power_iteration(self, POWER_TOL, POWER_CAP)?;
        Ok(est * est)
    }
}

pub const POWER_TOL: f64 = 1e-9;
pub const POWER_CAP: usize = 10_000;
/// Largest `min(n, p)` for which spectral norms are computed exactly.
pub const EXACT_SPECTRAL_LIMIT: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds from row-major data; `data.len()` must equal `rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix data length",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    what: "row length",
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn select_columns(&self, columns: &[usize]) -> Matrix {
        Matrix::from_fn(self.rows, columns.len(), |i, k| self.get(i, columns[k]))
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                what: "matmul inner dimension",
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `AᵀB` for two matrices sharing a row count.
    pub fn tr_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch {
                what: "row count",
                expected: self.rows,
                got: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            let a_row = self.row(r);
            let b_row = other.row(r);
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `[A | B]`
    pub fn hstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch {
                what: "row count",
                expected: self.rows,
                got: other.rows,
            });
        }
        Ok(Matrix::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self.get(i, j)
            } else {
                other.get(i, j - self.cols)
            }
        }))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.apply(x, &mut out);
        out
    }

    pub fn tr_matvec(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        self.apply_transpose(r, &mut out);
        out
    }

    /// Max absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Matrix {
        Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    /// Exact `‖A‖_{2→2}` via a symmetric eigendecomposition of the smaller Gram
    /// matrix. Falls back to power iteration above [`EXACT_SPECTRAL_LIMIT`].
    pub fn spectral_norm(&self) -> Result<f64> {
        if self.rows == 0 || self.cols == 0 {
            return Ok(0.0);
        }
        if self.rows.min(self.cols) > EXACT_SPECTRAL_LIMIT {
            return power_iteration(self, POWER_TOL, POWER_CAP);
        }
        let gram = if self.rows <= self.cols {
            self.transpose().tr_matmul(&self.transpose())?
        } else {
            self.tr_matmul(self)?
        };
        let eig = SymmetricEigen::new(gram.to_nalgebra());
        let top = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v));
        Ok(top.max(0.0).sqrt())
    }

    /// Singular values (descending) of a small matrix.
    pub fn singular_values(&self) -> Vec<f64> {
        if self.rows == 0 || self.cols == 0 {
            return Vec::new();
        }
        let svd = self.to_nalgebra().svd(false, false);
        let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        s
    }

    /// Spectral norm of a small matrix through its SVD.
    pub fn small_spectral_norm(&self) -> f64 {
        self.singular_values().first().copied().unwrap_or(0.0)
    }
}

impl LinearOperator for Matrix {
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            *o = acc;
        }
    }

    fn apply_transpose(&self, r: &[f64], out: &mut [f64]) {
        debug_assert_eq!(r.len(), self.rows);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &ri) in r.iter().enumerate() {
            if ri == 0.0 {
                continue;
            }
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * ri;
            }
        }
    }

    fn spectral_norm_sq(&self) -> Result<f64> {
        let s = self.spectral_norm()?;
        Ok(s * s)
    }
}

/// Largest eigenvalue of a symmetric matrix in absolute value, i.e. its
/// spectral norm.
pub fn symmetric_spectral_norm(m: &Matrix) -> f64 {
    if m.rows() == 0 {
        return 0.0;
    }
    let eig = SymmetricEigen::new(m.to_nalgebra());
    eig.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// `‖AᵀA − I‖_{2→2}`.
pub fn gram_deviation(a: &Matrix) -> Result<f64> {
    let mut gram = a.tr_matmul(a)?;
    for i in 0..gram.rows() {
        let v = gram.get(i, i) - 1.0;
        gram.set(i, i, v);
    }
    Ok(symmetric_spectral_norm(&gram))
}

/// Solves `A x = b` for square nonsingular `A` (LU with partial pivoting).
pub fn solve_linear(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.rows() != a.cols() || a.rows() != b.len() {
        return Err(Error::DimensionMismatch {
            what: "linear system size",
            expected: a.rows(),
            got: b.len(),
        });
    }
    if b.is_empty() {
        return Ok(Vec::new());
    }
    let rhs = nalgebra::DVector::from_column_slice(b);
    a.to_nalgebra()
        .lu()
        .solve(&rhs)
        .map(|x| x.iter().copied().collect())
        .ok_or(Error::RankDeficient { sigma_min: 0.0 })
}

/// Spectral norm by power iteration on `AᵀA`, stopping when successive
/// estimates of `‖A‖` agree to relative tolerance `tol`.
pub fn power_iteration<A: LinearOperator + ?Sized>(a: &A, tol: f64, cap: usize) -> Result<f64> {
    let p = a.ncols();
    if p == 0 || a.nrows() == 0 {
        return Ok(0.0);
    }
    // Deterministic start with no special alignment.
    let mut v: Vec<f64> = (0..p).map(|j| 1.0 + ((j * 7919) % 101) as f64 * 1e-3).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut av = vec![0.0; a.nrows()];
    let mut w = vec![0.0; p];
    let mut estimate = 0.0;
    for _ in 0..cap {
        a.apply(&v, &mut av);
        a.apply_transpose(&av, &mut w);
        let nw = norm2(&w);
        if nw == 0.0 {
            return Ok(0.0);
        }
        let next = nw.sqrt();
        w.iter().zip(v.iter_mut()).for_each(|(wi, vi)| *vi = wi / nw);
        if (next - estimate).abs() <= tol * next {
            return Ok(next);
        }
        estimate = next;
    }
    Err(Error::PowerIteration {
        iterations: cap,
        estimate,
    })
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean norm of the entries of `v` at `indices`.
#[inline]
pub fn norm2_at(v: &[f64], indices: &[usize]) -> f64 {
    indices.iter().map(|&j| v[j] * v[j]).sum::<f64>().sqrt()
}
