//! Row-major dense matrices and the handful of symmetric-matrix routines
//! the library needs: Jacobi eigendecomposition, spectral matrix functions
//! and a PSD-tolerant Cholesky factor. Dimensions are small (d <= ~20).

use std::ops::{Index, IndexMut};

use crate::error::{domain, invalid, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix. Also used as an `n x d` point container.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn scaled_identity(n: usize, s: T) -> Self {
        let mut m = Self::identity(n);
        m.scale_mut(s);
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(invalid(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(invalid(format!(
                    "row {i} has length {} (expected {cols})",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(invalid(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[T]) -> Result<Vec<T>> {
        if self.cols != v.len() {
            return Err(invalid(format!(
                "cannot multiply {}x{} matrix by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok(self.row_iter().map(|r| crate::scalar::dot(r, v)).collect())
    }

    pub fn scale_mut(&mut self, s: T) {
        self.data.iter_mut().for_each(|x| *x = *x * s);
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(invalid("matrix shape mismatch in addition"));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// Largest absolute asymmetry `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn symmetrized(&self) -> Self {
        let half = T::lit(0.5);
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                s[(i, j)] = half * (self[(i, j)] + self[(j, i)]);
            }
        }
        s
    }

    /// Column means of an `n x d` point matrix.
    pub fn column_means(&self) -> Vec<T> {
        let mut m = vec![T::zero(); self.cols];
        for r in self.row_iter() {
            for (acc, &x) in m.iter_mut().zip(r) {
                *acc = *acc + x;
            }
        }
        let n = T::from_usize_lossy(self.rows.max(1));
        m.iter_mut().for_each(|x| *x = *x / n);
        m
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigendecomposition `A = V diag(values) V^T` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    /// Eigenvectors stored as columns.
    pub vectors: Matrix<T>,
}

impl<T: Scalar> SymEigen<T> {
    /// Cyclic Jacobi rotations; the input is symmetrized first.
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(invalid("eigendecomposition needs a square matrix"));
        }
        if !a.all_finite() {
            return Err(domain("matrix has non-finite entries"));
        }
        let n = a.rows();
        let mut m = a.symmetrized();
        let mut v = Matrix::identity(n);
        let eps = T::epsilon();
        for _sweep in 0..100 {
            let mut off = T::zero();
            let mut total = T::zero();
            for i in 0..n {
                for j in 0..n {
                    let x = m[(i, j)] * m[(i, j)];
                    total = total + x;
                    if i != j {
                        off = off + x;
                    }
                }
            }
            if off <= eps * eps * total || off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let app = m[(p, p)];
                    let aqq = m[(q, q)];
                    let theta = (aqq - app) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let mkp = m[(k, p)];
                        let mkq = m[(k, q)];
                        m[(k, p)] = c * mkp - s * mkq;
                        m[(k, q)] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let mpk = m[(p, k)];
                        let mqk = m[(q, k)];
                        m[(p, k)] = c * mpk - s * mqk;
                        m[(q, k)] = s * mpk + c * mqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let values = (0..n).map(|i| m[(i, i)]).collect();
        Ok(Self { values, vectors: v })
    }

    /// `V diag(f(values)) V^T`.
    pub fn map(&self, f: impl Fn(T) -> T) -> Matrix<T> {
        let n = self.values.len();
        let fv: Vec<T> = self.values.iter().map(|&x| f(x)).collect();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = T::zero();
                for k in 0..n {
                    acc = acc + self.vectors[(i, k)] * fv[k] * self.vectors[(j, k)];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    pub fn min_value(&self) -> T {
        self.values.iter().fold(T::infinity(), |m, &x| m.min(x))
    }

    pub fn max_abs_value(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }
}

/// Checks symmetry within `1e-12` (scaled by the largest entry) and
/// non-negative spectrum within `1e-10`, returning the eigendecomposition
/// with negative round-off eigenvalues clamped to zero.
pub fn psd_eigen<T: Scalar>(a: &Matrix<T>, what: &str) -> Result<SymEigen<T>> {
    if !a.is_square() {
        return Err(invalid(format!("{what} must be square")));
    }
    let scale = a
        .as_slice()
        .iter()
        .fold(T::one(), |m, &x| m.max(x.abs()));
    if a.asymmetry() > T::lit(1e-12) * scale {
        return Err(invalid(format!("{what} is not symmetric")));
    }
    let mut eig = SymEigen::new(a)?;
    let tol = T::lit(1e-10) * eig.max_abs_value().max(T::one());
    if eig.min_value() < -tol {
        return Err(domain(format!(
            "{what} is not positive semi-definite (min eigenvalue {})",
            eig.min_value()
        )));
    }
    eig.values.iter_mut().for_each(|x| *x = x.max(T::zero()));
    Ok(eig)
}

/// Like [`psd_eigen`] but requires strictly positive eigenvalues.
pub fn spd_eigen<T: Scalar>(a: &Matrix<T>, what: &str) -> Result<SymEigen<T>> {
    let eig = psd_eigen(a, what)?;
    let tol = T::lit(1e-12) * eig.max_abs_value().max(T::min_positive_value());
    if eig.min_value() <= tol {
        return Err(domain(format!("{what} is singular or not positive definite")));
    }
    Ok(eig)
}

/// Lower-triangular `L` with `L L^T = A` for a symmetric PSD matrix.
/// Eigenvalues within `-1e-10` of zero are clamped; zero pivots produce
/// zero columns.
pub fn cholesky_psd<T: Scalar>(a: &Matrix<T>, what: &str) -> Result<Matrix<T>> {
    let eig = psd_eigen(a, what)?;
    let clamped = eig.map(|x| x);
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    let pivot_tol = T::lit(1e-14) * eig.max_abs_value().max(T::min_positive_value());
    for j in 0..n {
        let mut diag = clamped[(j, j)];
        for k in 0..j {
            diag = diag - l[(j, k)] * l[(j, k)];
        }
        if diag <= pivot_tol {
            continue;
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = clamped[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Log-determinant of an SPD matrix.
pub fn log_det_spd<T: Scalar>(a: &Matrix<T>, what: &str) -> Result<T> {
    let eig = spd_eigen(a, what)?;
    Ok(eig.values.iter().map(|x| x.ln()).sum())
}

/// Inverse of an SPD matrix via its eigendecomposition.
pub fn inverse_spd<T: Scalar>(a: &Matrix<T>, what: &str) -> Result<Matrix<T>> {
    let eig = spd_eigen(a, what)?;
    Ok(eig.map(|x| x.recip()))
}

/// Principal square root of a symmetric PSD matrix.
pub fn sqrt_psd<T: Scalar>(a: &Matrix<T>, what: &str) -> Result<Matrix<T>> {
    let eig = psd_eigen(a, what)?;
    Ok(eig.map(|x| x.sqrt()))
}
