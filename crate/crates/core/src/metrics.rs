//! Loss functions comparing a precision estimate against the truth.

use serde::Serialize;

use crate::error::Result;
use crate::matcore::{frobenius_norm, spectral_norm, sym_eigen, Matrix, SymMatrix};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossReport {
    pub kl: f64,
    pub l2: f64,
    pub ql: f64,
    pub sp: f64,
}

impl LossReport {
    pub fn compute(sigma: &SymMatrix<f64>, theta: &SymMatrix<f64>, theta_hat: &SymMatrix<f64>) -> Result<Self> {
        Ok(Self {
            kl: kl_loss(sigma, theta_hat)?,
            l2: l2_loss(theta, theta_hat)?,
            ql: ql_loss(sigma, theta_hat)?,
            sp: sp_loss(theta, theta_hat)?,
        })
    }
}

/// `tr(ΣΘ̂) − log det(ΣΘ̂) − p`, clamped at zero against rounding.
pub fn kl_loss<T: Real>(sigma: &SymMatrix<T>, theta_hat: &SymMatrix<T>) -> Result<T> {
    sigma.check_same_dim(theta_hat)?;
    let p = T::from_usize(sigma.dim()).unwrap();
    let ld = crate::matcore::logdet(sigma)? + crate::matcore::logdet(theta_hat)?;
    let value = sigma.trace_product(theta_hat) - ld - p;
    Ok(value.max(T::zero()))
}

/// `‖Θ − Θ̂‖_F`.
pub fn l2_loss<T: Real>(theta: &SymMatrix<T>, theta_hat: &SymMatrix<T>) -> Result<T> {
    theta.check_same_dim(theta_hat)?;
    Ok(frobenius_norm(&(theta - theta_hat)))
}

/// `tr((ΣΘ̂ − I)²)`.
pub fn ql_loss<T: Real>(sigma: &SymMatrix<T>, theta_hat: &SymMatrix<T>) -> Result<T> {
    let mut prod: Matrix<T> = sigma.matmul(theta_hat)?;
    for i in 0..sigma.dim() {
        prod.set(i, i, prod.get(i, i) - T::one());
    }
    Ok(prod.trace_of_square().max(T::zero()))
}

/// Spectral norm of `(Θ − Θ̂)²`.
pub fn sp_loss<T: Real>(theta: &SymMatrix<T>, theta_hat: &SymMatrix<T>) -> Result<T> {
    theta.check_same_dim(theta_hat)?;
    spectral_norm(&(theta - theta_hat).square())
}

/// Spectral norm of `Θ − Θ̂`, the unsquared variant of [`sp_loss`].
pub fn sp_loss_unsquared<T: Real>(theta: &SymMatrix<T>, theta_hat: &SymMatrix<T>) -> Result<T> {
    theta.check_same_dim(theta_hat)?;
    let eig = sym_eigen(&(theta - theta_hat))?;
    Ok(eig.max_value().abs().max(eig.min_value().abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::matcore::spd_inverse;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pd(p: usize, rng: &mut ChaCha8Rng) -> SymMatrix<f64> {
        let x = Matrix::from_fn(p + 3, p, |_, _| rng.random_range(-1.0..1.0));
        x.gram().add_diag(0.1)
    }

    #[test]
    fn perfect_estimate_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sigma = random_pd(6, &mut rng);
        let theta = spd_inverse(&sigma).unwrap();
        let r = LossReport::compute(&sigma, &theta, &theta).unwrap();
        assert!(r.kl.abs() < 1e-10 && r.l2 < 1e-10 && r.ql.abs() < 1e-10 && r.sp < 1e-10, "{r:?}");
    }

    #[test]
    fn kl_example() {
        let v = kl_loss(&SymMatrix::<f64>::identity(2), &SymMatrix::scalar(2, 2.0)).unwrap();
        assert!((v - (4.0 - 2.0 * 2f64.ln() - 2.0)).abs() < 1e-14);
        assert!((v - 0.61371).abs() < 1e-5);
        assert!(matches!(
            kl_loss(&SymMatrix::<f64>::identity(2), &SymMatrix::from_diag(&[1.0, 0.0])),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn kl_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let a = random_pd(4, &mut rng);
            let b = random_pd(4, &mut rng);
            assert!(kl_loss(&a, &b).unwrap() >= 0.0);
        }
    }

    #[test]
    fn l2_examples() {
        assert_eq!(l2_loss(&SymMatrix::<f64>::identity(4), &SymMatrix::zeros(4)).unwrap(), 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_pd(5, &mut rng);
        let b = random_pd(5, &mut rng);
        let oracle: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        assert!((l2_loss(&a, &b).unwrap() - oracle).abs() < 1e-10);
    }

    #[test]
    fn ql_examples() {
        let v = ql_loss(&SymMatrix::<f64>::identity(3), &SymMatrix::scalar(3, 2.0)).unwrap();
        assert!((v - 3.0).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_pd(5, &mut rng);
        let b = random_pd(5, &mut rng);
        let mut m = a.matmul(&b).unwrap();
        for i in 0..5 {
            m.set(i, i, m.get(i, i) - 1.0);
        }
        let sq = m.matmul(&m).unwrap();
        assert!((ql_loss(&a, &b).unwrap() - sq.trace()).abs() < 1e-9);
    }

    #[test]
    fn sp_examples() {
        let theta = SymMatrix::<f64>::from_diag(&[1.5, 0.8]);
        let v = sp_loss(&theta, &SymMatrix::identity(2)).unwrap();
        assert!((v - 0.25).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let a = random_pd(5, &mut rng);
            let b = random_pd(5, &mut rng);
            let un = sp_loss_unsquared(&a, &b).unwrap();
            assert!((sp_loss(&a, &b).unwrap() - un * un).abs() < 1e-10 * un.max(1.0).powi(2));
            assert!(sp_loss(&a, &b).unwrap() <= l2_loss(&a, &b).unwrap().powi(2) + 1e-10);
        }
    }
}
