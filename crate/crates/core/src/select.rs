//! K-fold cross-validation over a `(lambda, alpha)` grid.

use std::cmp::Ordering;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, GridFailure, Result};
use crate::estimators::{Method, TargetSpec, TwoStepConfig};
use crate::matcore::{logdet, Matrix, SymMatrix};
use crate::simgen::sample_cov;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub folds: usize,
    pub lambda_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    pub seed: u64,
    /// Center training and held-out rows with the training mean.
    pub center: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            lambda_grid: log_grid(1e-3, 10.0, 25),
            alpha_grid: (0..=10).map(|k| k as f64 / 10.0).collect(),
            seed: 0,
            center: false,
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 folds, got {}", self.folds)));
        }
        if self.lambda_grid.is_empty() || self.alpha_grid.is_empty() {
            return Err(Error::InvalidInput("tuning grids must be non-empty".into()));
        }
        if let Some(l) = self.lambda_grid.iter().find(|&&l| !(l > 0.0 && l <= 10.0)) {
            return Err(Error::InvalidInput(format!("lambda grid value {l} outside (0, 10]")));
        }
        if let Some(a) = self.alpha_grid.iter().find(|&&a| !(0.0..=1.0).contains(&a)) {
            return Err(Error::InvalidInput(format!("alpha grid value {a} outside [0, 1]")));
        }
        Ok(())
    }
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut grid: Vec<f64> = (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect();
    grid[0] = lo;
    grid[n - 1] = hi;
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub lambda: f64,
    pub alpha: f64,
    /// Mean held-out score over folds; `None` when some fold failed.
    pub mean_score: Option<f64>,
    pub sd_score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub best_lambda: f64,
    pub best_alpha: f64,
    pub score_surface: Vec<GridPoint>,
    pub fold_assignments: Vec<usize>,
    /// Estimate refitted on all rows with the selected parameters.
    pub estimate: SymMatrix<f64>,
}

/// Shuffles `0..n` and deals the positions round-robin into `folds` folds.
pub fn kfold_split(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds == 0 || n < folds {
        return Err(Error::InvalidInput(format!("cannot split {n} rows into {folds} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        assignment[row] = pos % folds;
    }
    Ok(assignment)
}

/// Held-out Gaussian log-likelihood `log det Θ̂ − tr(S Θ̂)`.
pub fn cv_score(theta_hat: &SymMatrix<f64>, s_heldout: &SymMatrix<f64>) -> Result<f64> {
    Ok(logdet(theta_hat)? - s_heldout.trace_product(theta_hat))
}

struct Fold {
    s_train: SymMatrix<f64>,
    s_held: SymMatrix<f64>,
}

fn covariance(x: &Matrix<f64>, mean: Option<&[f64]>) -> Result<SymMatrix<f64>> {
    match mean {
        Some(m) => sample_cov(&x.subtract_row(m)),
        None => sample_cov(x),
    }
}

fn build_folds(x: &Matrix<f64>, assignment: &[usize], folds: usize, center: bool) -> Result<Vec<Fold>> {
    (0..folds)
        .map(|k| {
            let train_idx: Vec<usize> = (0..x.rows()).filter(|&i| assignment[i] != k).collect();
            let held_idx: Vec<usize> = (0..x.rows()).filter(|&i| assignment[i] == k).collect();
            let train = x.select_rows(&train_idx);
            let held = x.select_rows(&held_idx);
            let mean = center.then(|| train.column_means());
            Ok(Fold {
                s_train: covariance(&train, mean.as_deref())?,
                s_held: covariance(&held, mean.as_deref())?,
            })
        })
        .collect()
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Orders candidates: higher score first, then larger lambda, then smaller alpha.
fn better(a: &GridPoint, b: &GridPoint) -> bool {
    let (sa, sb) = (a.mean_score.unwrap(), b.mean_score.unwrap());
    match sa.partial_cmp(&sb).unwrap_or(Ordering::Equal) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => a.lambda > b.lambda || (a.lambda == b.lambda && a.alpha < b.alpha),
    }
}

/// Exhaustive K-fold search. A grid point counts as failed when any of its
/// fold fits fails; the winner is refitted on all rows.
pub fn grid_search(
    x: &Matrix<f64>,
    method: Method,
    target: &TargetSpec<f64>,
    cfg: &CvConfig,
    ts_cfg: &TwoStepConfig,
) -> Result<CvResult> {
    cfg.validate()?;
    let assignment = kfold_split(x.rows(), cfg.folds, cfg.seed)?;
    let folds = build_folds(x, &assignment, cfg.folds, cfg.center)?;
    let targets: Vec<Result<SymMatrix<f64>>> = folds.iter().map(|f| target.resolve(&f.s_train)).collect();

    let alphas: &[f64] = if method.uses_alpha() { &cfg.alpha_grid } else { &[0.0] };
    let points: Vec<(f64, f64)> = cfg
        .lambda_grid
        .iter()
        .flat_map(|&l| alphas.iter().map(move |&a| (l, a)))
        .collect();

    let surface: Vec<GridPoint> = points
        .par_iter()
        .map(|&(lambda, alpha)| {
            let scores: Result<Vec<f64>> = folds
                .iter()
                .zip(&targets)
                .map(|(fold, t)| {
                    let t = t.as_ref().map_err(|e| Error::InvalidInput(e.to_string()))?;
                    let theta = method.fit(&fold.s_train, t, lambda, alpha, ts_cfg)?;
                    cv_score(&theta, &fold.s_held)
                })
                .collect();
            match scores {
                Ok(s) => {
                    let (m, sd) = mean_sd(&s);
                    GridPoint {
                        lambda,
                        alpha,
                        mean_score: m.is_finite().then_some(m),
                        sd_score: m.is_finite().then_some(sd),
                        error: (!m.is_finite()).then(|| "non-finite score".to_string()),
                    }
                }
                Err(e) => GridPoint {
                    lambda,
                    alpha,
                    mean_score: None,
                    sd_score: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let best = surface
        .iter()
        .filter(|g| g.mean_score.is_some())
        .fold(None::<&GridPoint>, |acc, g| match acc {
            Some(b) if !better(g, b) => Some(b),
            _ => Some(g),
        });
    let Some(best) = best else {
        return Err(Error::SelectionFailure {
            failures: surface
                .iter()
                .map(|g| GridFailure {
                    lambda: g.lambda,
                    alpha: g.alpha,
                    message: g.error.clone().unwrap_or_default(),
                })
                .collect(),
        });
    };
    let (best_lambda, best_alpha) = (best.lambda, best.alpha);

    let mean = cfg.center.then(|| x.column_means());
    let s_full = covariance(x, mean.as_deref())?;
    let estimate = method.fit(&s_full, &target.resolve(&s_full)?, best_lambda, best_alpha, ts_cfg)?;

    Ok(CvResult {
        best_lambda,
        best_alpha,
        score_surface: surface,
        fold_assignments: assignment,
        estimate,
    })
}

/// Writes the score surface as `lambda,alpha,mean_score,sd_score`; failed
/// points have empty score fields.
pub fn write_surface_csv(path: &Path, result: &CvResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["lambda", "alpha", "mean_score", "sd_score"])?;
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for g in &result.score_surface {
        w.write_record([g.lambda.to_string(), g.alpha.to_string(), fmt(g.mean_score), fmt(g.sd_score)])?;
    }
    w.flush()?;
    Ok(())
}
