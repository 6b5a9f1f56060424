#![allow(dead_code)]

use graphridge::matcore::{Matrix, SymMatrix};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sample covariance of `n` standard normal-ish rows (uniform entries), so
/// singular when `n < p`.
pub fn random_cov(p: usize, n: usize, rng: &mut ChaCha8Rng) -> SymMatrix<f64> {
    let x = Matrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
    x.gram().scaled(1.0 / n as f64)
}

pub fn random_spd(p: usize, rng: &mut ChaCha8Rng) -> SymMatrix<f64> {
    random_cov(p, p + 5, rng).add_diag(0.05)
}

pub fn to_na(m: &SymMatrix<f64>) -> DMatrix<f64> {
    let p = m.dim();
    DMatrix::from_fn(p, p, |i, j| m.get(i, j))
}

pub fn from_na(m: &DMatrix<f64>) -> SymMatrix<f64> {
    SymMatrix::from_fn(m.nrows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

pub fn na_inverse(m: &SymMatrix<f64>) -> DMatrix<f64> {
    to_na(m).try_inverse().expect("invertible")
}

/// `V f(D) Vᵀ` through nalgebra's symmetric eigensolver.
pub fn na_matrix_fn(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Ridge closed form `(1/c)[(cI + ¼M²)^{1/2} − ½M]` with `M = S − λT`,
/// computed from nalgebra's decomposition of `M`.
pub fn oracle_alt_ridge(s: &SymMatrix<f64>, t: &SymMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let m = to_na(s) - to_na(t) * lambda;
    na_matrix_fn(&m, |mu| ((lambda + 0.25 * mu * mu).sqrt() - 0.5 * mu) / lambda)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, &b| a.max(b.abs()))
}

pub fn max_abs_diff(a: &SymMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    max_abs(&(to_na(a) - b))
}

/// Random orthogonal matrix from the QR factor of a Gaussian-ish matrix.
pub fn random_orthogonal(p: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    let q = a.qr().q();
    Matrix::from_fn(p, p, |i, j| q[(i, j)])
}
