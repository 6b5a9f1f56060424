//! Dense symmetric linear algebra: storage, eigendecomposition, SPD square
//! root and inverse, and the matrix norms the estimators and losses need.

mod dense;
mod eigen;

use std::ops::{Add, Mul, Neg, Sub};

pub use dense::Matrix;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense symmetric `p x p` matrix.
///
/// Full row-major storage; every mutator writes both `(i, j)` and `(j, i)`,
/// so `get(i, j) == get(j, i)` holds bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> SymMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, T::one())
    }

    /// `value * I`.
    pub fn scalar(dim: usize, value: T) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = value;
        }
        m
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let dim = diag.len();
        let mut m = Self::zeros(dim);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * dim + i] = d;
        }
        m
    }

    /// Builds the matrix from `f(i, j)` evaluated on the upper triangle only.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                m.data[i * dim + j] = v;
                m.data[j * dim + i] = v;
            }
        }
        m
    }

    /// Builds from square rows, rejecting asymmetry above `tol` (max-abs).
    /// Within tolerance the two triangles are averaged.
    pub fn from_rows(rows: &[Vec<T>], tol: T) -> Result<Self> {
        let dense = Matrix::from_rows(rows)?;
        Self::from_dense(&dense, tol)
    }

    /// Symmetrizes a square dense matrix, rejecting asymmetry above `tol`.
    pub fn from_dense(m: &Matrix<T>, tol: T) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::DimensionMismatch {
                expected: m.rows(),
                actual: m.cols(),
            });
        }
        let dim = m.rows();
        let mut worst = T::zero();
        for i in 0..dim {
            for j in (i + 1)..dim {
                worst = worst.max((m.get(i, j) - m.get(j, i)).abs());
            }
        }
        if !(worst <= tol) {
            return Err(Error::InvalidInput(format!(
                "matrix is not symmetric (max asymmetry {worst})"
            )));
        }
        Ok(Self::from_dense_average(m))
    }

    /// `(M + Mᵀ) / 2` for a square dense matrix, without any check.
    pub fn from_dense_average(m: &Matrix<T>) -> Self {
        let half = T::half();
        Self::from_fn(m.rows(), |i, j| {
            if i == j {
                m.get(i, i)
            } else {
                half * (m.get(i, j) + m.get(j, i))
            }
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.dim + j]
    }

    /// Sets `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        self.data[i * self.dim + j] = value;
        self.data[j * self.dim + i] = value;
    }

    #[inline]
    pub(crate) fn add_upper(&mut self, i: usize, j: usize, value: T) {
        self.data[i * self.dim + j] += value;
    }

    pub(crate) fn mirror_upper(&mut self) {
        let n = self.dim;
        for i in 0..n {
            for j in (i + 1)..n {
                self.data[j * n + i] = self.data[i * n + j];
            }
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> Matrix<T> {
        Matrix::from_vec(self.dim, self.dim, self.data.clone()).expect("square storage")
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    /// Converts the scalar type (e.g. `f32` to `f64`).
    pub fn cast<U: Real>(&self) -> SymMatrix<U> {
        SymMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .map(|&x| U::from_f64(x.to_f64_lossy()).unwrap_or_else(U::nan))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&x| x * factor).collect(),
        }
    }

    /// `self + value * I`.
    pub fn add_diag(&self, value: T) -> Self {
        let mut out = self.clone();
        for i in 0..self.dim {
            out.data[i * self.dim + i] += value;
        }
        out
    }

    /// `a * A + b * B`.
    pub fn lin_comb(a: T, lhs: &Self, b: T, rhs: &Self) -> Result<Self> {
        lhs.check_same_dim(rhs)?;
        Ok(Self {
            dim: lhs.dim,
            data: lhs
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&x, &y)| a * x + b * y)
                .collect(),
        })
    }

    pub(crate) fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: other.dim,
            });
        }
        Ok(())
    }

    /// General product `self * other` (not symmetric in general).
    pub fn matmul(&self, other: &SymMatrix<T>) -> Result<Matrix<T>> {
        self.to_dense().matmul(&other.to_dense())
    }

    /// `self * self`, symmetric since `self` is.
    pub fn square(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |i, j| {
            self.row(i)
                .iter()
                .zip(self.row(j))
                .map(|(&a, &b)| a * b)
                .sum()
        })
    }

    pub fn mul_vec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok((0..self.dim)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect())
    }

    pub fn trace(&self) -> T {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `tr(self * other)`; for symmetric operands this is the entrywise inner product.
    pub fn trace_product(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .sum()
    }

    /// Entrywise L1 norm `sum |a_ij|`, diagonal included.
    pub fn l1_norm(&self) -> T {
        self.data.iter().map(|x| x.abs()).sum()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// `P A Pᵀ` where row `i` of the result is row `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(perm[i], perm[j]))
    }

    /// `Q A Qᵀ` for a square dense `Q`.
    pub fn congruence(&self, q: &Matrix<T>) -> Result<Self> {
        let left = q.matmul(&self.to_dense())?;
        let full = left.matmul(&q.transpose())?;
        Ok(Self::from_dense_average(&full))
    }

    /// `D A D` for a diagonal `D` given by its entries.
    pub fn diag_scaled(&self, d: &[T]) -> Self {
        Self::from_fn(self.dim, |i, j| d[i] * self.get(i, j) * d[j])
    }
}

impl<T: Real> Add for &SymMatrix<T> {
    type Output = SymMatrix<T>;
    fn add(self, rhs: Self) -> SymMatrix<T> {
        SymMatrix::lin_comb(T::one(), self, T::one(), rhs).expect("matching dimensions")
    }
}

impl<T: Real> Sub for &SymMatrix<T> {
    type Output = SymMatrix<T>;
    fn sub(self, rhs: Self) -> SymMatrix<T> {
        SymMatrix::lin_comb(T::one(), self, -T::one(), rhs).expect("matching dimensions")
    }
}

impl<T: Real> Mul<T> for &SymMatrix<T> {
    type Output = SymMatrix<T>;
    fn mul(self, rhs: T) -> SymMatrix<T> {
        self.scaled(rhs)
    }
}

impl<T: Real> Neg for &SymMatrix<T> {
    type Output = SymMatrix<T>;
    fn neg(self) -> SymMatrix<T> {
        self.scaled(-T::one())
    }
}

/// Eigenvalues in non-increasing order with orthonormal eigenvectors as the
/// columns of `vectors`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomp<T> {
    pub values: Vec<T>,
    pub vectors: Matrix<T>,
}

impl<T: Real> EigenDecomp<T> {
    /// `V f(D) Vᵀ`, applying `f` to each eigenvalue.
    pub fn map(&self, mut f: impl FnMut(T) -> T) -> SymMatrix<T> {
        let n = self.values.len();
        let fd: Vec<T> = self.values.iter().map(|&x| f(x)).collect();
        let v = &self.vectors;
        SymMatrix::from_fn(n, |i, j| {
            let (vi, vj) = (v.row(i), v.row(j));
            (0..n).map(|k| vi[k] * fd[k] * vj[k]).sum()
        })
    }

    pub fn reconstruct(&self) -> SymMatrix<T> {
        self.map(|x| x)
    }

    pub fn min_value(&self) -> T {
        self.values.last().copied().unwrap_or_else(T::zero)
    }

    pub fn max_value(&self) -> T {
        self.values.first().copied().unwrap_or_else(T::zero)
    }
}

/// Symmetric eigendecomposition.
pub fn sym_eigen<T: Real>(m: &SymMatrix<T>) -> Result<EigenDecomp<T>> {
    if !m.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let n = m.dim();
    if n == 0 {
        return Ok(EigenDecomp {
            values: Vec::new(),
            vectors: Matrix::zeros(0, 0),
        });
    }
    let (values, vectors) = eigen::symmetric_eigen(n, m.as_slice())
        .ok_or_else(|| Error::NumericalFailure("symmetric QL iteration did not converge".into()))?;
    Ok(EigenDecomp {
        values,
        vectors: Matrix::from_vec(n, n, vectors)?,
    })
}

/// Principal square root of a PSD matrix. Eigenvalues in `[-PSD_CLAMP, 0)`
/// are clamped to zero.
pub fn spd_sqrt<T: Real>(m: &SymMatrix<T>) -> Result<SymMatrix<T>> {
    let eig = sym_eigen(m)?;
    let min = eig.min_value();
    if min < -T::lit(T::PSD_CLAMP) {
        return Err(Error::NotPositiveSemiDefinite {
            min_eigenvalue: min.to_f64_lossy(),
        });
    }
    Ok(eig.map(|x| x.max(T::zero()).sqrt()))
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse<T: Real>(m: &SymMatrix<T>) -> Result<SymMatrix<T>> {
    let eig = sym_eigen(m)?;
    let min = eig.min_value();
    if !(min > T::lit(T::PD_TOL)) {
        return Err(Error::SingularMatrix {
            min_eigenvalue: min.to_f64_lossy(),
        });
    }
    Ok(eig.map(|x| T::one() / x))
}

/// `log det(m)` for a positive definite matrix.
pub fn logdet<T: Real>(m: &SymMatrix<T>) -> Result<T> {
    let eig = sym_eigen(m)?;
    let min = eig.min_value();
    if !(min > T::zero()) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min.to_f64_lossy(),
        });
    }
    Ok(eig.values.iter().map(|x| x.ln()).sum())
}

pub fn min_eigenvalue<T: Real>(m: &SymMatrix<T>) -> Result<T> {
    Ok(sym_eigen(m)?.min_value())
}

/// Lower-triangular Cholesky factor `L` with `m = L Lᵀ`.
pub fn cholesky<T: Real>(m: &SymMatrix<T>) -> Result<Matrix<T>> {
    let n = m.dim();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = m.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > T::zero()) {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: min_eigenvalue(m).map(|x| x.to_f64_lossy()).unwrap_or(f64::NAN),
            });
        }
        let djj = d.sqrt();
        l.set(j, j, djj);
        for i in (j + 1)..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / djj);
        }
    }
    Ok(l)
}

pub fn frobenius_norm<T: Real>(m: &SymMatrix<T>) -> T {
    m.as_slice().iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Largest absolute eigenvalue, which is the largest singular value for a
/// symmetric matrix.
pub fn spectral_norm<T: Real>(m: &SymMatrix<T>) -> Result<T> {
    let eig = sym_eigen(m)?;
    Ok(eig.max_value().abs().max(eig.min_value().abs()))
}

/// `max |m_ij|` over `i != j`; zero for a `1 x 1` matrix.
pub fn max_abs_offdiag<T: Real>(m: &SymMatrix<T>) -> T {
    let n = m.dim();
    let mut best = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            best = best.max(m.get(i, j).abs());
        }
    }
    best
}
