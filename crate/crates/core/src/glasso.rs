//! Graphical lasso by block coordinate ascent on the covariance `W`.
//!
//! Each column of `W` is updated by solving an L1-penalized least-squares
//! problem with coordinate descent. The L1 penalty covers the diagonal as
//! well, so the diagonal of `W` is pinned at `s_ii + rho`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, PartialFit, Result};
use crate::matcore::{logdet, max_abs_offdiag, spd_inverse, SymMatrix};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlassoConfig {
    pub max_iter: usize,
    /// Stop once the mean absolute change of `W` over one sweep drops below this.
    pub tol: f64,
    /// Record the penalized objective after every sweep.
    #[serde(skip)]
    pub track_objective: bool,
}

impl Default for GlassoConfig {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            tol: 1e-6,
            track_objective: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlassoFit<T> {
    pub theta: SymMatrix<T>,
    /// Working covariance; the inverse of `theta` up to solver tolerance.
    pub w: SymMatrix<T>,
    pub rho: T,
    pub iterations: usize,
    pub converged: bool,
    /// Penalized objective after each sweep (empty unless tracking was requested).
    pub objective_trace: Vec<T>,
}

impl<T: Real> GlassoFit<T> {
    pub fn to_partial(&self) -> PartialFit {
        PartialFit {
            dim: self.theta.dim(),
            theta: self.theta.as_slice().iter().map(|x| x.to_f64_lossy()).collect(),
            w: self.w.as_slice().iter().map(|x| x.to_f64_lossy()).collect(),
            iterations: self.iterations,
        }
    }
}

#[inline]
fn soft_threshold<T: Real>(x: T, rho: T) -> T {
    if x > rho {
        x - rho
    } else if x < -rho {
        x + rho
    } else {
        T::zero()
    }
}

/// Worst subgradient violation of `min ½ βᵀGβ − βᵀt + ρ‖β‖₁`.
fn lasso_violation<T: Real>(
    n: usize,
    gram: &impl Fn(usize, usize) -> T,
    target: &[T],
    beta: &[T],
    rho: T,
) -> T {
    let mut worst = T::zero();
    for k in 0..n {
        let mut grad = target[k];
        for (l, &b) in beta.iter().enumerate() {
            grad -= gram(k, l) * b;
        }
        let v = if beta[k] == T::zero() {
            (grad.abs() - rho).max(T::zero())
        } else {
            (grad - rho * beta[k].signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Cyclic coordinate descent, warm-started from `beta`. Returns whether the
/// subgradient violation fell below `tol` within `max_sweeps`.
fn cd_solve<T: Real>(
    n: usize,
    gram: impl Fn(usize, usize) -> T,
    target: &[T],
    beta: &mut [T],
    rho: T,
    tol: T,
    max_sweeps: usize,
) -> bool {
    for _ in 0..max_sweeps {
        let mut max_step = T::zero();
        for k in 0..n {
            let mut r = target[k];
            for (l, &b) in beta.iter().enumerate() {
                if l != k && b != T::zero() {
                    r -= gram(k, l) * b;
                }
            }
            let updated = soft_threshold(r, rho) / gram(k, k);
            max_step = max_step.max((updated - beta[k]).abs());
            beta[k] = updated;
        }
        if max_step <= tol && lasso_violation(n, &gram, target, beta, rho) <= tol {
            return true;
        }
    }
    lasso_violation(n, &gram, target, beta, rho) <= tol
}

/// Solves `min_β ½ βᵀ G β − βᵀ t + ρ ‖β‖₁` by coordinate descent.
pub fn lasso_cd<T: Real>(gram: &SymMatrix<T>, target: &[T], rho: T, tol: T) -> Result<Vec<T>> {
    let n = gram.dim();
    if target.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: target.len(),
        });
    }
    if !gram.is_finite() || target.iter().any(|x| !x.is_finite()) || !rho.is_finite() {
        return Err(Error::InvalidInput("lasso input has non-finite values".into()));
    }
    if rho < T::zero() {
        return Err(Error::InvalidInput("lasso penalty must be non-negative".into()));
    }
    if (0..n).any(|k| !(gram.get(k, k) > T::zero())) {
        return Err(Error::InvalidInput("lasso gram matrix needs a positive diagonal".into()));
    }
    let mut beta = vec![T::zero(); n];
    if !cd_solve(n, |a, b| gram.get(a, b), target, &mut beta, rho, tol, 100_000) {
        return Err(Error::ConvergenceFailure {
            context: "lasso coordinate descent".into(),
            iterations: 100_000,
            partial: None,
        });
    }
    Ok(beta)
}

/// `log det Θ − tr(SΘ) − ρ ‖Θ‖₁`; `-inf` when `Θ` is not positive definite.
pub fn glasso_objective<T: Real>(theta: &SymMatrix<T>, s: &SymMatrix<T>, rho: T) -> T {
    match logdet(theta) {
        Ok(ld) => ld - s.trace_product(theta) - rho * theta.l1_norm(),
        Err(_) => T::neg_infinity(),
    }
}

/// Precision matrix implied by the current `W` and per-column regression
/// coefficients (`betas[j]` is indexed by the columns other than `j`).
fn precision_from_betas<T: Real>(w: &SymMatrix<T>, betas: &[Vec<T>]) -> SymMatrix<T> {
    let p = w.dim();
    let mut cols = vec![vec![T::zero(); p]; p];
    for j in 0..p {
        let beta = &betas[j];
        let mut denom = w.get(j, j);
        for (a, i) in (0..p).filter(|&i| i != j).enumerate() {
            denom -= w.get(i, j) * beta[a];
        }
        let theta_jj = T::one() / denom;
        cols[j][j] = theta_jj;
        for (a, i) in (0..p).filter(|&i| i != j).enumerate() {
            cols[j][i] = -beta[a] * theta_jj;
        }
    }
    SymMatrix::from_fn(p, |i, j| {
        if i == j {
            cols[i][i]
        } else {
            T::half() * (cols[j][i] + cols[i][j])
        }
    })
}

/// Fits the graphical lasso at penalty `rho`.
///
/// Hitting `max_iter` is not an error: the fit comes back with
/// `converged == false`.
pub fn glasso_fit<T: Real>(
    s: &SymMatrix<T>,
    rho: T,
    max_iter: usize,
    tol: T,
) -> Result<GlassoFit<T>> {
    let cfg = GlassoConfig {
        max_iter,
        tol: tol.to_f64_lossy(),
        track_objective: false,
    };
    glasso_with(s, rho, &cfg)
}

/// [`glasso_fit`] driven by a [`GlassoConfig`].
pub fn glasso_with<T: Real>(s: &SymMatrix<T>, rho: T, cfg: &GlassoConfig) -> Result<GlassoFit<T>> {
    if !s.is_finite() {
        return Err(Error::InvalidInput("sample covariance has non-finite entries".into()));
    }
    if !(rho >= T::zero()) || !rho.is_finite() {
        return Err(Error::InvalidInput(format!("glasso penalty must be >= 0, got {rho}")));
    }
    if !(cfg.tol > 0.0) {
        return Err(Error::InvalidInput("glasso tolerance must be positive".into()));
    }
    let p = s.dim();
    if p == 0 {
        return Err(Error::InvalidInput("empty covariance matrix".into()));
    }

    if rho == T::zero() {
        let theta = spd_inverse(s)?;
        let objective_trace = if cfg.track_objective {
            vec![glasso_objective(&theta, s, rho)]
        } else {
            Vec::new()
        };
        return Ok(GlassoFit {
            theta,
            w: s.clone(),
            rho,
            iterations: 0,
            converged: true,
            objective_trace,
        });
    }

    let tol = T::lit(cfg.tol);
    let inner_tol = tol * T::lit(0.1);
    let mut w = s.add_diag(rho);
    let mut betas: Vec<Vec<T>> = vec![vec![T::zero(); p.saturating_sub(1)]; p];
    let mut objective_trace = Vec::new();

    // Dominating penalty: the diagonal fit is exact, no sweeps needed.
    if p == 1 || max_abs_offdiag(s) <= rho {
        let w = SymMatrix::from_diag(&w.diag());
        let theta = SymMatrix::from_diag(&w.diag().iter().map(|&x| T::one() / x).collect::<Vec<_>>());
        if cfg.track_objective {
            objective_trace.push(glasso_objective(&theta, s, rho));
        }
        return Ok(GlassoFit {
            theta,
            w,
            rho,
            iterations: 1,
            converged: true,
            objective_trace,
        });
    }

    let norm = T::from_usize(p * p).unwrap();
    let mut iterations = 0;
    let mut converged = false;
    let mut target = vec![T::zero(); p - 1];
    while iterations < cfg.max_iter {
        iterations += 1;
        let mut total_change = T::zero();
        for j in 0..p {
            let idx: Vec<usize> = (0..p).filter(|&i| i != j).collect();
            for (a, &i) in idx.iter().enumerate() {
                target[a] = s.get(i, j);
            }
            let beta = &mut betas[j];
            cd_solve(
                p - 1,
                |a, b| w.get(idx[a], idx[b]),
                &target,
                beta,
                rho,
                inner_tol,
                10_000,
            );
            for &i in &idx {
                let updated: T = idx
                    .iter()
                    .enumerate()
                    .map(|(b, &k)| w.get(i, k) * beta[b])
                    .sum();
                total_change += T::lit(2.0) * (updated - w.get(i, j)).abs();
                w.set(i, j, updated);
            }
        }
        if cfg.track_objective {
            let theta = precision_from_betas(&w, &betas);
            objective_trace.push(glasso_objective(&theta, s, rho));
        }
        if total_change / norm < tol {
            converged = true;
            break;
        }
    }

    let theta = precision_from_betas(&w, &betas);
    Ok(GlassoFit {
        theta,
        w,
        rho,
        iterations,
        converged,
        objective_trace,
    })
}

/// Largest violation of the stationarity conditions `W − S = ρ·sign(Θ)`
/// (with `|W − S| ≤ ρ` where `Θ` is zero).
pub fn kkt_check<T: Real>(fit: &GlassoFit<T>, s: &SymMatrix<T>, rho: T) -> T {
    let p = s.dim();
    let zero_tol = T::lit(1e-10);
    let mut worst = T::zero();
    for i in 0..p {
        for j in i..p {
            let theta = fit.theta.get(i, j);
            let gap = fit.w.get(i, j) - s.get(i, j);
            let scale = (fit.theta.get(i, i).abs() * fit.theta.get(j, j).abs()).sqrt();
            let v = if theta.abs() <= zero_tol * scale {
                (gap.abs() - rho).max(T::zero())
            } else {
                (gap - rho * theta.signum()).abs()
            };
            worst = worst.max(v);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::Matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_cov(n: usize, p: usize, seed: u64) -> SymMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Matrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        x.gram().scaled(1.0 / n as f64)
    }

    #[test]
    fn lasso_full_shrinkage_and_identity_gram() {
        let g = SymMatrix::<f64>::identity(3);
        let t = [0.3, -0.2, 0.1];
        assert_eq!(lasso_cd(&g, &t, 0.5, 1e-12).unwrap(), vec![0.0; 3]);
        assert_eq!(lasso_cd(&g, &t, 0.0, 1e-12).unwrap(), t.to_vec());
    }

    fn lasso_value(g: &SymMatrix<f64>, t: &[f64], rho: f64, b: &[f64]) -> f64 {
        let gb = g.mul_vec(b).unwrap();
        0.5 * b.iter().zip(&gb).map(|(x, y)| x * y).sum::<f64>()
            - b.iter().zip(t).map(|(x, y)| x * y).sum::<f64>()
            + rho * b.iter().map(|x| x.abs()).sum::<f64>()
    }

    #[test]
    fn lasso_matches_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Matrix::from_fn(6, 3, |_, _| rng.random_range(-1.0..1.0));
        let g = x.gram().add_diag(0.2);
        let t = [0.8, -0.5, 0.3];
        let rho = 0.15;
        let beta = lasso_cd(&g, &t, rho, 1e-12).unwrap();

        // Coarse grid, then a fine grid around the coarse minimizer.
        let mut best = (f64::INFINITY, [0.0; 3]);
        let coarse: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.05).collect();
        for &a in &coarse {
            for &b in &coarse {
                for &c in &coarse {
                    let v = lasso_value(&g, &t, rho, &[a, b, c]);
                    if v < best.0 {
                        best = (v, [a, b, c]);
                    }
                }
            }
        }
        let centre = best.1;
        for i in -50..=50 {
            for j in -50..=50 {
                for k in -50..=50 {
                    let cand = [
                        centre[0] + i as f64 * 1e-3,
                        centre[1] + j as f64 * 1e-3,
                        centre[2] + k as f64 * 1e-3,
                    ];
                    let v = lasso_value(&g, &t, rho, &cand);
                    if v < best.0 {
                        best = (v, cand);
                    }
                }
            }
        }
        let cd_value = lasso_value(&g, &t, rho, &beta);
        assert!(cd_value <= best.0 + 1e-9);
        assert!((cd_value - best.0).abs() < 1e-4);
        for k in 0..3 {
            assert!((beta[k] - best.1[k]).abs() < 2e-3);
        }
    }

    #[test]
    fn lasso_rejects_non_finite() {
        let g = SymMatrix::<f64>::identity(2);
        assert!(matches!(
            lasso_cd(&g, &[f64::NAN, 0.0], 0.1, 1e-8),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn unpenalized_fit_is_the_inverse() {
        let s = sample_cov(30, 5, 1);
        let fit = glasso_fit(&s, 0.0, 100, 1e-6).unwrap();
        assert!(fit.theta.max_abs_diff(&spd_inverse(&s).unwrap()) < 1e-12);
        assert_eq!(fit.w, s);
        assert!(kkt_check(&fit, &s, 0.0) < 1e-8);
    }

    #[test]
    fn unpenalized_singular_input_fails() {
        let s = sample_cov(3, 5, 2);
        assert!(matches!(
            glasso_fit(&s, 0.0, 100, 1e-6),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn dominating_penalty_gives_diagonal_solution() {
        let s = SymMatrix::from_rows(&[vec![1.0, 0.3], vec![0.3, 1.0]], 0.0).unwrap();
        let fit = glasso_fit(&s, 0.5, 100, 1e-6).unwrap();
        assert!(fit.converged);
        assert!(fit.theta.max_abs_diff(&SymMatrix::from_diag(&[1.0 / 1.5, 1.0 / 1.5])) < 1e-15);
        assert!(fit.w.max_abs_diff(&SymMatrix::from_diag(&[1.5, 1.5])) < 1e-15);
        assert!(kkt_check(&fit, &s, 0.5) < 1e-10);
    }

    #[test]
    fn random_fit_satisfies_kkt_and_inverse_relation() {
        for seed in 0..5 {
            let s = sample_cov(40, 10, 100 + seed);
            let fit = glasso_fit(&s, 0.05, 1000, 1e-8).unwrap();
            assert!(fit.converged);
            assert!(kkt_check(&fit, &s, 0.05) < 1e-4);
            let prod = fit.theta.matmul(&fit.w).unwrap();
            let id = SymMatrix::<f64>::identity(10).to_dense();
            assert!(prod.max_abs_diff(&id) < 1e-4);
            for i in 0..10 {
                assert!((fit.w.get(i, i) - s.get(i, i) - 0.05).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn objective_is_monotone_over_sweeps() {
        for seed in 0..5 {
            let s = sample_cov(15, 12, 200 + seed);
            let cfg = GlassoConfig {
                max_iter: 500,
                tol: 1e-10,
                track_objective: true,
            };
            let fit = glasso_with(&s, 0.08, &cfg).unwrap();
            let trace = &fit.objective_trace;
            assert!(trace.len() >= 2);
            for w in trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "objective decreased: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn unconverged_fit_has_larger_kkt_residual() {
        let s = sample_cov(20, 8, 5);
        let rough = glasso_fit(&s, 0.05, 1, 1e-10).unwrap();
        let fine = glasso_fit(&s, 0.05, 1000, 1e-10).unwrap();
        assert!(!rough.converged);
        assert!(kkt_check(&rough, &s, 0.05) > kkt_check(&fine, &s, 0.05));
    }

    #[test]
    fn solution_is_permutation_invariant() {
        let s = sample_cov(25, 6, 17);
        let perm = [3, 0, 5, 1, 4, 2];
        let direct = glasso_fit(&s, 0.07, 5000, 1e-13).unwrap();
        let permuted = glasso_fit(&s.permuted(&perm), 0.07, 5000, 1e-13).unwrap();
        let mut inverse = [0; 6];
        for (i, &pi) in perm.iter().enumerate() {
            inverse[pi] = i;
        }
        let back = permuted.theta.permuted(&inverse);
        assert!(back.max_abs_diff(&direct.theta) < 1e-8);
    }

    #[test]
    fn negative_penalty_rejected() {
        let s = SymMatrix::<f64>::identity(2);
        assert!(glasso_fit(&s, -0.1, 10, 1e-6).is_err());
    }
}
