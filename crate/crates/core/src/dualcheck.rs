//! Numerical check of the dual reformulation of the elastic-net precision
//! problem.
//!
//! Writing `λα‖Θ‖₁ = max_{‖U‖∞ ≤ λα} tr(UΘ)` turns the primal into a saddle
//! problem. For fixed `U` the inner maximizer is
//!
//! ```text
//! Θ*(U) = (1/c) [(A² + c I)^{1/2} − A],   A = ½(S + U − cT),   c = λ(1−α)
//! ```
//!
//! and the dual function, up to a constant, is `log det Θ* − tr(Θ* A)`. It is
//! convex in `U` with partial derivatives `−2θ*_ij` (off-diagonal) and
//! `−θ*_ii`, and is minimized over the box.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{riccati_inverse_form, two_step, TuningParams, TwoStepConfig};
use crate::glasso::{glasso_with, GlassoConfig};
use crate::matcore::{logdet, sym_eigen, SymMatrix};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct DualProblem<T> {
    pub s: SymMatrix<T>,
    pub t: SymMatrix<T>,
    pub tp: TuningParams<T>,
}

impl<T: Real> DualProblem<T> {
    /// `alpha` may be 0 (the box collapses to `U = 0`) but must stay below 1,
    /// where the Frobenius term and with it the closed form disappear.
    pub fn new(s: SymMatrix<T>, t: SymMatrix<T>, tp: TuningParams<T>) -> Result<Self> {
        s.check_same_dim(&t)?;
        if !s.is_finite() || !t.is_finite() {
            return Err(Error::InvalidInput("dual problem has non-finite entries".into()));
        }
        if !(tp.lambda > T::zero()) || !tp.lambda.is_finite() {
            return Err(Error::InvalidInput(format!("lambda must be > 0, got {}", tp.lambda)));
        }
        if !(tp.alpha >= T::zero() && tp.alpha < T::one()) {
            return Err(Error::InvalidInput(format!("alpha must lie in [0, 1), got {}", tp.alpha)));
        }
        Ok(Self { s, t, tp })
    }

    pub fn dim(&self) -> usize {
        self.s.dim()
    }

    /// Frobenius weight `λ(1−α)`.
    pub fn ridge(&self) -> T {
        self.tp.lambda * (T::one() - self.tp.alpha)
    }

    /// Half-width `λα` of the box on `U`.
    pub fn bound(&self) -> T {
        self.tp.lambda * self.tp.alpha
    }

    fn check_box(&self, u: &SymMatrix<T>) -> Result<()> {
        self.s.check_same_dim(u)?;
        let limit = self.bound() + T::lit(1e-12);
        if u.max_abs() > limit {
            return Err(Error::InvalidInput(format!(
                "dual variable violates the box |U| <= {}",
                self.bound()
            )));
        }
        Ok(())
    }

    /// `S + U − cT`, i.e. `2A`.
    fn shifted(&self, u: &SymMatrix<T>) -> Result<SymMatrix<T>> {
        let su = &self.s + u;
        SymMatrix::lin_comb(T::one(), &su, -self.ridge(), &self.t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution<T> {
    pub u_star: SymMatrix<T>,
    pub theta_star: SymMatrix<T>,
    pub objective_value: T,
    pub solver_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualSolverConfig {
    /// Random starts for `p >= 3`.
    pub restarts: usize,
    pub max_sweeps: usize,
    /// Objective change between sweeps that counts as converged.
    pub tol: f64,
    /// Largest coordinate move in a sweep that counts as converged.
    pub step_tol: f64,
    /// Points per axis of the initial grid used for `p = 2`.
    pub grid_points: usize,
    pub seed: u64,
    /// Glasso settings for the comparison fit.
    pub glasso: GlassoConfig,
}

impl Default for DualSolverConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_sweeps: 10_000,
            tol: 1e-10,
            step_tol: 1e-11,
            grid_points: 21,
            seed: 0,
            glasso: GlassoConfig {
                max_iter: 100_000,
                tol: 1e-13,
                track_objective: false,
            },
        }
    }
}

/// Inner maximizer `Θ*(U)`.
pub fn theta_star<T: Real>(u: &SymMatrix<T>, prob: &DualProblem<T>) -> Result<SymMatrix<T>> {
    riccati_inverse_form(&prob.shifted(u)?, prob.ridge())
}

fn b_matrix<T: Real>(a: &SymMatrix<T>, c: T) -> Result<SymMatrix<T>> {
    let root = crate::matcore::spd_sqrt(&a.square().add_diag(c))?;
    SymMatrix::lin_comb(T::one() / c, &root, -T::one() / c, a)
}

/// Dual objective `log det B − tr(BA)` evaluated through matrix functions.
pub fn dual_objective<T: Real>(u: &SymMatrix<T>, prob: &DualProblem<T>) -> Result<T> {
    prob.check_box(u)?;
    let a = prob.shifted(u)?.scaled(T::half());
    let b = b_matrix(&a, prob.ridge())?;
    let ld = logdet(&b).map_err(|e| Error::NumericalFailure(format!("dual objective: {e}")))?;
    Ok(ld - b.trace_product(&a))
}

/// Same objective written as `tr(log B − BA)` with the matrix logarithm.
pub fn dual_objective_trace_log<T: Real>(u: &SymMatrix<T>, prob: &DualProblem<T>) -> Result<T> {
    prob.check_box(u)?;
    let a = prob.shifted(u)?.scaled(T::half());
    let b = b_matrix(&a, prob.ridge())?;
    let eig = sym_eigen(&b)?;
    if eig.min_value() <= T::zero() {
        return Err(Error::NumericalFailure(format!(
            "dual objective: B has eigenvalue {}",
            eig.min_value()
        )));
    }
    let log_b = eig.map(|x| x.ln());
    let ba = b.matmul(&a)?;
    Ok(log_b.trace() - ba.trace())
}

/// Spectral form for `T = γI`:
/// `Σᵢ log(√(bᵢ² + c) + bᵢ) + (1/c)·bᵢ(√(bᵢ² + c) − bᵢ)` with
/// `bᵢ = ½(eigᵢ(S+U) − cγ)`. Equals `−dual_objective`.
pub fn dual_objective_eig<T: Real>(u: &SymMatrix<T>, prob: &DualProblem<T>, gamma: T) -> Result<T> {
    prob.check_box(u)?;
    let expected = SymMatrix::scalar(prob.dim(), gamma);
    if prob.t.max_abs_diff(&expected) > T::lit(1e-12) {
        return Err(Error::InvalidInput("spectral dual form needs T = gamma * I".into()));
    }
    let c = prob.ridge();
    let eig = sym_eigen(&(&prob.s + u))?;
    let mut total = T::zero();
    for &ev in &eig.values {
        let b = T::half() * (ev - c * gamma);
        let r = (b * b + c).sqrt();
        // for b < 0 use r + b = c / (r − b) to avoid cancellation
        let log_term = if b >= T::zero() { (r + b).ln() } else { c.ln() - (r - b).ln() };
        let ratio_term = if b >= T::zero() { b * c / (r + b) } else { b * (r - b) };
        total += log_term + ratio_term / c;
    }
    Ok(total)
}

/// Max-abs of the inner stationarity condition `Θ⁻¹ − S − U − c(Θ − T)`.
pub fn dual_stationarity_residual<T: Real>(
    theta: &SymMatrix<T>,
    u: &SymMatrix<T>,
    prob: &DualProblem<T>,
) -> Result<T> {
    let inv = crate::matcore::spd_inverse(theta)?;
    let c = prob.ridge();
    let p = prob.dim();
    let mut worst = T::zero();
    for i in 0..p {
        for j in 0..p {
            let r = inv.get(i, j) - prob.s.get(i, j) - u.get(i, j) - c * (theta.get(i, j) - prob.t.get(i, j));
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

struct Descent<T> {
    u: SymMatrix<T>,
    objective: T,
    sweeps: usize,
    converged: bool,
}

/// Exact minimization of the dual along `u_ij` (and `u_ji`).
fn minimize_coordinate<T: Real>(u: &mut SymMatrix<T>, i: usize, j: usize, prob: &DualProblem<T>) -> Result<T> {
    let b = prob.bound();
    let old = u.get(i, j);
    let theta_at = |v: T, u: &mut SymMatrix<T>| -> Result<T> {
        u.set(i, j, v);
        Ok(theta_star(u, prob)?.get(i, j))
    };
    // θ_ij is non-increasing in u_ij, the partial derivative is a negative multiple of it
    let new = if theta_at(b, u)? >= T::zero() {
        b
    } else if theta_at(-b, u)? <= T::zero() {
        -b
    } else {
        let (mut lo, mut hi) = (-b, b);
        let width = T::epsilon() * T::lit(4.0) * (T::one() + b);
        for _ in 0..200 {
            if hi - lo <= width {
                break;
            }
            let mid = T::half() * (lo + hi);
            let th = theta_at(mid, u)?;
            if th > T::zero() {
                lo = mid;
            } else if th < T::zero() {
                hi = mid;
            } else {
                lo = mid;
                hi = mid;
            }
        }
        T::half() * (lo + hi)
    };
    u.set(i, j, new);
    Ok((new - old).abs())
}

fn coordinate_descent<T: Real>(mut u: SymMatrix<T>, prob: &DualProblem<T>, cfg: &DualSolverConfig) -> Result<Descent<T>> {
    let p = prob.dim();
    let tol = T::lit(cfg.tol);
    let step_tol = T::lit(cfg.step_tol);
    let mut objective = dual_objective(&u, prob)?;
    for sweep in 1..=cfg.max_sweeps {
        let mut max_move = T::zero();
        for i in 0..p {
            for j in i..p {
                max_move = max_move.max(minimize_coordinate(&mut u, i, j, prob)?);
            }
        }
        let next = dual_objective(&u, prob)?;
        let change = (objective - next).abs();
        objective = next;
        if change <= tol && max_move <= step_tol {
            return Ok(Descent {
                u,
                objective,
                sweeps: sweep,
                converged: true,
            });
        }
    }
    Ok(Descent {
        u,
        objective,
        sweeps: cfg.max_sweeps,
        converged: false,
    })
}

fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    if n <= 1 {
        return vec![T::half() * (lo + hi)];
    }
    let step = (hi - lo) / T::from_usize(n - 1).unwrap();
    (0..n).map(|k| lo + step * T::from_usize(k).unwrap()).collect()
}

/// Best point of a dense grid over `(u11, u22, u12)` for `p = 2`.
fn grid_start<T: Real>(prob: &DualProblem<T>, points: usize) -> Result<SymMatrix<T>> {
    let b = prob.bound();
    let axis = linspace(-b, b, points);
    let mut best: Option<(T, SymMatrix<T>)> = None;
    for &d1 in &axis {
        for &d2 in &axis {
            for &off in &axis {
                let u = SymMatrix::from_rows(&[vec![d1, off], vec![off, d2]], T::zero())?;
                let Ok(value) = dual_objective(&u, prob) else {
                    continue;
                };
                if best.as_ref().is_none_or(|(v, _)| value < *v) {
                    best = Some((value, u));
                }
            }
        }
    }
    best.map(|(_, u)| u)
        .ok_or_else(|| Error::NumericalFailure("dual objective undefined on the whole grid".into()))
}

fn random_start<T: Real>(prob: &DualProblem<T>, seed: u64, restart: usize) -> SymMatrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    let b = prob.bound().to_f64_lossy();
    SymMatrix::from_fn(prob.dim(), |_, _| T::lit(rng.random_range(-1.0..=1.0) * b))
}

/// Box-constrained minimizer of [`dual_objective`] for small `p`.
///
/// `p = 2` starts from the best point of a dense grid; larger problems run
/// `cfg.restarts` random starts (in parallel) and keep the lowest objective,
/// ties going to the earliest restart.
pub fn solve_dual_numeric<T: Real>(prob: &DualProblem<T>, cfg: &DualSolverConfig) -> Result<DualSolution<T>> {
    let p = prob.dim();
    if p > 10 {
        return Err(Error::UnsupportedDimension(p));
    }
    if prob.bound() == T::zero() {
        let u = SymMatrix::zeros(p);
        return Ok(DualSolution {
            theta_star: theta_star(&u, prob)?,
            objective_value: dual_objective(&u, prob)?,
            u_star: u,
            solver_iterations: 0,
        });
    }

    let starts: Vec<SymMatrix<T>> = if p <= 2 {
        vec![if p == 2 { grid_start(prob, cfg.grid_points)? } else { SymMatrix::zeros(p) }]
    } else {
        (0..cfg.restarts.max(1)).map(|r| random_start(prob, cfg.seed, r)).collect()
    };

    let runs: Vec<Result<Descent<T>>> = starts
        .into_par_iter()
        .map(|u0| coordinate_descent(u0, prob, cfg))
        .collect();

    let mut best: Option<Descent<T>> = None;
    let mut last_err = None;
    for run in runs {
        match run {
            Ok(d) if d.converged => {
                if best.as_ref().is_none_or(|b| d.objective < b.objective) {
                    best = Some(d);
                }
            }
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some(d) => Ok(DualSolution {
            theta_star: theta_star(&d.u, prob)?,
            objective_value: d.objective,
            u_star: d.u,
            solver_iterations: d.sweeps,
        }),
        None => Err(last_err.unwrap_or(Error::ConvergenceFailure {
            context: "dual coordinate descent".into(),
            iterations: cfg.max_sweeps,
            partial: None,
        })),
    }
}

/// Dual variable `U = W − S` realized by the glasso fit at penalty `λα`.
pub fn glasso_dual<T: Real>(prob: &DualProblem<T>, glasso: &GlassoConfig) -> Result<SymMatrix<T>> {
    let fit = glasso_with(&prob.s, prob.bound(), glasso)?;
    if !fit.converged {
        return Err(Error::ConvergenceFailure {
            context: "graphical lasso (dual comparison)".into(),
            iterations: fit.iterations,
            partial: Some(Box::new(fit.to_partial())),
        });
    }
    Ok(&fit.w - &prob.s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualComparison<T> {
    pub dual: DualSolution<T>,
    pub glasso_u: SymMatrix<T>,
    pub two_step_theta: SymMatrix<T>,
    /// Max-abs difference between the two precision matrices.
    pub theta_diff: T,
    /// `|u_dual − u_glasso|` for the upper off-diagonal entries, row by row.
    pub offdiag_u_diffs: Vec<T>,
}

/// Solves the dual numerically and sets it against the glasso dual and the
/// dual-consistent 2-step estimate.
pub fn compare<T: Real>(prob: &DualProblem<T>, cfg: &DualSolverConfig) -> Result<DualComparison<T>> {
    let dual = solve_dual_numeric(prob, cfg)?;
    let glasso_u = glasso_dual(prob, &cfg.glasso)?;
    let ts_cfg = TwoStepConfig {
        glasso: cfg.glasso,
        dual_consistent: true,
    };
    let two_step_theta = two_step(&prob.s, &prob.t, prob.tp, &ts_cfg)?;
    let theta_diff = dual.theta_star.max_abs_diff(&two_step_theta);
    let p = prob.dim();
    let mut offdiag_u_diffs = Vec::with_capacity(p * (p - 1) / 2);
    for i in 0..p {
        for j in (i + 1)..p {
            offdiag_u_diffs.push((dual.u_star.get(i, j) - glasso_u.get(i, j)).abs());
        }
    }
    Ok(DualComparison {
        dual,
        glasso_u,
        two_step_theta,
        theta_diff,
        offdiag_u_diffs,
    })
}

/// Max-abs difference between the dual-optimal `Θ` and the dual-consistent
/// 2-step estimate.
pub fn compare_with_two_step<T: Real>(prob: &DualProblem<T>, cfg: &DualSolverConfig) -> Result<T> {
    compare(prob, cfg).map(|c| c.theta_diff)
}

/// Repeated comparison on compound-symmetry samples with an identity target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub p: usize,
    pub iterations: usize,
    /// Observations per simulated sample.
    pub n: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub solver: DualSolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            p: 3,
            iterations: 15,
            n: 50,
            lambda: 0.6,
            alpha: 0.4,
            solver: DualSolverConfig::default(),
        }
    }
}

/// Runs the comparison `cfg.iterations` times; iteration `k` samples with a
/// seed derived from `(seed, k)`. Only `p ∈ {2, 3}` is supported.
pub fn run_experiment(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<DualComparison<f64>>> {
    use crate::simgen::{derive_seed, make_network, sample_cov, sample_mvn, NetworkModel, NetworkSpec};
    if !(2..=3).contains(&cfg.p) {
        return Err(Error::UnsupportedDimension(cfg.p));
    }
    let truth = make_network(NetworkSpec {
        model: NetworkModel::CompoundSymmetry,
        p: cfg.p,
        seed,
    })?;
    let tp = TuningParams::new(cfg.lambda, cfg.alpha)?;
    (0..cfg.iterations)
        .into_par_iter()
        .map(|k| {
            let x = sample_mvn(&truth, cfg.n, derive_seed(seed, k as u64))?;
            let prob = DualProblem::new(sample_cov(&x)?, SymMatrix::identity(cfg.p), tp)?;
            compare(&prob, &cfg.solver)
        })
        .collect()
}

/// Writes `iteration,u12_diff,u13_diff,u23_diff,theta_diff`; entries that do
/// not exist for `p = 2` are left empty.
pub fn write_experiment_csv(path: &std::path::Path, rows: &[DualComparison<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "u12_diff", "u13_diff", "u23_diff", "theta_diff"])?;
    for (k, row) in rows.iter().enumerate() {
        let mut rec = vec![(k + 1).to_string()];
        for slot in 0..3 {
            rec.push(row.offdiag_u_diffs.get(slot).map(|d| format!("{d:e}")).unwrap_or_default());
        }
        rec.push(format!("{:e}", row.theta_diff));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
