//! Synthetic ground truths (six network models), Gaussian sampling and the
//! uncentered sample covariance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{cholesky, spd_inverse, sym_eigen, Matrix, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkModel {
    /// Unit variances, common covariance 0.6².
    CompoundSymmetry,
    /// Standardized `A + aI`, sparse 0.5 entries, condition number `p`.
    RandomSparse,
    /// Precision `YᵀY/n₀` from `n₀ = 10000` standard normal rows.
    WishartLike,
    /// Unit-diagonal precision with weight 0.1 between node 1 and the rest.
    Star,
    /// Banded covariance with weights 0.2 and 0.2².
    MovingAverage,
    /// Symmetrized uniform covariance scaled to be diagonally dominant.
    DiagDominant,
}

impl NetworkModel {
    pub const ALL: [NetworkModel; 6] = [
        NetworkModel::CompoundSymmetry,
        NetworkModel::RandomSparse,
        NetworkModel::WishartLike,
        NetworkModel::Star,
        NetworkModel::MovingAverage,
        NetworkModel::DiagDominant,
    ];

    pub fn label(self) -> &'static str {
        match self {
            NetworkModel::CompoundSymmetry => "compound_symmetry",
            NetworkModel::RandomSparse => "random_sparse",
            NetworkModel::WishartLike => "wishart_like",
            NetworkModel::Star => "star",
            NetworkModel::MovingAverage => "moving_average",
            NetworkModel::DiagDominant => "diag_dominant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub model: NetworkModel,
    pub p: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub sigma: SymMatrix<f64>,
    pub theta: SymMatrix<f64>,
    pub spec: NetworkSpec,
}

impl GroundTruth {
    /// Writes `sigma.csv` and `theta.csv` into `dir`.
    pub fn write_csv(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        crate::io::write_matrix_csv(&dir.join("sigma.csv"), &self.sigma, None)?;
        crate::io::write_matrix_csv(&dir.join("theta.csv"), &self.theta, None)
    }
}

const CS_COVARIANCE: f64 = 0.36;
const SPARSE_PROB: f64 = 0.1;
const SPARSE_VALUE: f64 = 0.5;
const WISHART_ROWS: usize = 10_000;
const STAR_WEIGHT: f64 = 0.1;
const MA_WEIGHTS: [f64; 2] = [0.2, 0.04];
const DIAG_JITTER: f64 = 0.1;
const BISECTION_STEPS: usize = 200;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent child seed for stream `stream` of `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream))
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn from_precision(theta: SymMatrix<f64>, spec: NetworkSpec) -> Result<GroundTruth> {
    let sigma = spd_inverse(&theta).map_err(|e| Error::GenerationFailure(format!("{}: {e}", spec.model.label())))?;
    Ok(GroundTruth { sigma, theta, spec })
}

fn from_covariance(sigma: SymMatrix<f64>, spec: NetworkSpec) -> Result<GroundTruth> {
    let theta = spd_inverse(&sigma).map_err(|e| Error::GenerationFailure(format!("{}: {e}", spec.model.label())))?;
    Ok(GroundTruth { sigma, theta, spec })
}

/// Shift `a` with `cond(A + aI) = p`, by bisection on the interval where
/// `A + aI` is positive definite.
pub fn condition_shift(mu_max: f64, mu_min: f64, target: f64, upper: f64) -> Result<f64> {
    let cond = |a: f64| (mu_max + a) / (mu_min + a);
    if !(mu_max - mu_min > 1e-12 * mu_max.abs().max(1.0)) {
        return Err(Error::GenerationFailure(
            "prototype has a flat spectrum, no shift reaches the requested condition number".into(),
        ));
    }
    let mut lo = (-mu_min).max(0.0);
    let mut hi = upper;
    if !(hi > lo) || cond(hi) > target {
        return Err(Error::GenerationFailure(format!(
            "condition number {target} not reachable for shifts up to {upper}"
        )));
    }
    // cond decreases in a on (−μmin, ∞)
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let c = cond(mid);
        if !c.is_finite() || c > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    if ((cond(a) - target) / target).abs() > 1e-3 {
        return Err(Error::GenerationFailure(format!(
            "bisection ended at condition number {}",
            cond(a)
        )));
    }
    Ok(a)
}

fn random_sparse(spec: NetworkSpec) -> Result<GroundTruth> {
    let p = spec.p;
    let mut rng = rng_for(spec.seed);
    let mut a = SymMatrix::zeros(p);
    for i in 0..p {
        for j in (i + 1)..p {
            if rng.random::<f64>() < SPARSE_PROB {
                a.set(i, j, SPARSE_VALUE);
            }
        }
    }
    let eig = sym_eigen(&a)?;
    let shift = condition_shift(eig.max_value(), eig.min_value(), p as f64, 10.0 * p as f64)?;
    // diag(A + aI) is a everywhere, so standardizing divides by a
    let mut theta = a.scaled(1.0 / shift);
    for i in 0..p {
        theta.set(i, i, 1.0);
    }
    from_precision(theta, spec)
}

fn wishart_like(spec: NetworkSpec) -> Result<GroundTruth> {
    let mut rng = rng_for(spec.seed);
    let y = Matrix::from_fn(WISHART_ROWS, spec.p, |_, _| rng.sample::<f64, _>(StandardNormal));
    from_precision(sample_cov(&y)?, spec)
}

fn diag_dominant(spec: NetworkSpec) -> Result<GroundTruth> {
    let p = spec.p;
    let mut rng = rng_for(spec.seed);
    let a = Matrix::from_fn(p, p, |i, j| if i == j { 0.0 } else { rng.random::<f64>() });
    let b = SymMatrix::from_fn(p, |i, j| 0.5 * (a.get(i, j) + a.get(j, i)));
    let gamma = (0..p)
        .map(|i| b.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut sigma = b.scaled(1.0 / gamma);
    for i in 0..p {
        sigma.set(i, i, 1.0 + rng.random_range(0.0..DIAG_JITTER));
    }
    from_covariance(sigma, spec)
}

/// Builds the ground truth of one network model.
pub fn make_network(spec: NetworkSpec) -> Result<GroundTruth> {
    let p = spec.p;
    if p < 2 {
        return Err(Error::InvalidInput(format!("network dimension must be >= 2, got {p}")));
    }
    match spec.model {
        NetworkModel::CompoundSymmetry => {
            let sigma = SymMatrix::from_fn(p, |i, j| if i == j { 1.0 } else { CS_COVARIANCE });
            from_covariance(sigma, spec)
        }
        NetworkModel::RandomSparse => random_sparse(spec),
        NetworkModel::WishartLike => wishart_like(spec),
        NetworkModel::Star => {
            let theta = SymMatrix::from_fn(p, |i, j| match (i, j) {
                _ if i == j => 1.0,
                (0, _) | (_, 0) => STAR_WEIGHT,
                _ => 0.0,
            });
            if crate::matcore::min_eigenvalue(&theta)? <= 0.0 {
                return Err(Error::GenerationFailure(format!("star precision is not positive definite at p = {p}")));
            }
            from_precision(theta, spec)
        }
        NetworkModel::MovingAverage => {
            let sigma = SymMatrix::from_fn(p, |i, j| match j.abs_diff(i) {
                0 => 1.0,
                1 => MA_WEIGHTS[0],
                2 => MA_WEIGHTS[1],
                _ => 0.0,
            });
            if crate::matcore::min_eigenvalue(&sigma)? <= 0.0 {
                return Err(Error::GenerationFailure("moving-average covariance is not positive definite".into()));
            }
            from_covariance(sigma, spec)
        }
        NetworkModel::DiagDominant => diag_dominant(spec),
    }
}

/// `n` draws from `N(0, Σ)` as rows, `x = L z` with `Σ = L Lᵀ`.
pub fn sample_mvn(truth: &GroundTruth, n: usize, seed: u64) -> Result<Matrix<f64>> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 draws, got {n}")));
    }
    let l = cholesky(&truth.sigma)?;
    let p = truth.sigma.dim();
    let mut rng = rng_for(seed);
    let mut data = Vec::with_capacity(n * p);
    let mut z = vec![0.0; p];
    for _ in 0..n {
        z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        for i in 0..p {
            data.push(l.row(i)[..=i].iter().zip(&z).map(|(a, b)| a * b).sum());
        }
    }
    Matrix::from_vec(n, p, data)
}

/// `XᵀX / n` without centering.
pub fn sample_cov(x: &Matrix<f64>) -> Result<SymMatrix<f64>> {
    if x.rows() == 0 {
        return Err(Error::InvalidInput("sample covariance needs at least one row".into()));
    }
    Ok(x.gram().scaled(1.0 / x.rows() as f64))
}
