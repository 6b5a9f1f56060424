//! Application pipelines: LDA classification with plug-in precision
//! estimates, and partial-correlation networks of asset returns.

use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, GridFailure, Result};
use crate::estimators::{Method, TargetSpec, TwoStepConfig};
use crate::matcore::{min_eigenvalue, Matrix, SymMatrix};
use crate::select::{grid_search, CvConfig};
use crate::simgen::{derive_seed, sample_cov};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Group {
    G1,
    G2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
    pub theta: SymMatrix<f64>,
    /// `Θ̂(μ̄₁ − μ̄₂)`.
    pub a: Vec<f64>,
    /// `½(μ̄₁ + μ̄₂)`.
    pub mu: Vec<f64>,
}

impl LdaModel {
    pub fn discriminant(&self, x: &[f64]) -> f64 {
        self.a.iter().zip(x.iter().zip(&self.mu)).map(|(a, (x, m))| a * (x - m)).sum()
    }
}

pub fn lda_fit(x1: &Matrix<f64>, x2: &Matrix<f64>, theta_hat: &SymMatrix<f64>) -> Result<LdaModel> {
    let p = theta_hat.dim();
    if x1.cols() != p || x2.cols() != p {
        return Err(Error::InvalidInput(format!(
            "class data have {} and {} columns, precision has dimension {p}",
            x1.cols(),
            x2.cols()
        )));
    }
    if x1.rows() == 0 || x2.rows() == 0 {
        return Err(Error::InvalidInput("both classes need at least one row".into()));
    }
    let mu1 = x1.column_means();
    let mu2 = x2.column_means();
    let diff: Vec<f64> = mu1.iter().zip(&mu2).map(|(a, b)| a - b).collect();
    let a = theta_hat.mul_vec(&diff)?;
    let mu = mu1.iter().zip(&mu2).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(LdaModel {
        mu1,
        mu2,
        theta: theta_hat.clone(),
        a,
        mu,
    })
}

/// `G1` iff `aᵀ(x − μ) > 0`.
pub fn lda_classify(model: &LdaModel, x: &[f64]) -> Group {
    if model.discriminant(x) > 0.0 {
        Group::G1
    } else {
        Group::G2
    }
}

/// Within-class covariance: each class centered at its own mean, divisor
/// `n₁ + n₂`.
pub fn pooled_covariance(x1: &Matrix<f64>, x2: &Matrix<f64>) -> Result<SymMatrix<f64>> {
    sample_cov(&stack_centered(x1, x2))
}

fn stack_centered(x1: &Matrix<f64>, x2: &Matrix<f64>) -> Matrix<f64> {
    let c1 = x1.centered();
    let c2 = x2.centered();
    let mut data = c1.as_slice().to_vec();
    data.extend_from_slice(c2.as_slice());
    Matrix::from_vec(c1.rows() + c2.rows(), x1.cols(), data).expect("equal widths")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LdaTuning {
    Fixed { lambda: f64, alpha: f64 },
    /// K-fold likelihood cross-validation on the within-class centered training rows.
    CrossValidation(CvConfig),
    /// Grid point with the lowest misclassification on the validation rows.
    Validation { lambda_grid: Vec<f64>, alpha_grid: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdaProtocol {
    pub train: usize,
    #[serde(default)]
    pub validation: usize,
    pub tuning: LdaTuning,
    #[serde(default)]
    pub two_step: TwoStepConfig,
}

impl Default for LdaProtocol {
    fn default() -> Self {
        Self {
            train: 40,
            validation: 0,
            tuning: LdaTuning::Fixed { lambda: 0.5, alpha: 0.2 },
            two_step: TwoStepConfig::default(),
        }
    }
}

fn error_rate(model: &LdaModel, x: &Matrix<f64>, labels: &[usize], rows: &[usize]) -> f64 {
    let wrong = rows
        .iter()
        .filter(|&&r| {
            let truth = if labels[r] == 0 { Group::G1 } else { Group::G2 };
            lda_classify(model, x.row(r)) != truth
        })
        .count();
    wrong as f64 / rows.len() as f64
}

fn split_classes(x: &Matrix<f64>, labels: &[usize], rows: &[usize]) -> Result<(Matrix<f64>, Matrix<f64>)> {
    let g1: Vec<usize> = rows.iter().copied().filter(|&r| labels[r] == 0).collect();
    let g2: Vec<usize> = rows.iter().copied().filter(|&r| labels[r] == 1).collect();
    if g1.len() < 2 || g2.len() < 2 {
        return Err(Error::InvalidSplit(format!(
            "training rows per class: {} and {}, need at least 2 each",
            g1.len(),
            g2.len()
        )));
    }
    Ok((x.select_rows(&g1), x.select_rows(&g2)))
}

/// Fits the LDA model on `train` rows, tuning per the protocol.
fn fit_repetition(
    x: &Matrix<f64>,
    labels: &[usize],
    train: &[usize],
    validation: &[usize],
    method: Method,
    target: &TargetSpec<f64>,
    protocol: &LdaProtocol,
) -> Result<LdaModel> {
    let (x1, x2) = split_classes(x, labels, train)?;
    let s = pooled_covariance(&x1, &x2)?;
    let t = target.resolve(&s)?;
    let theta = match &protocol.tuning {
        LdaTuning::Fixed { lambda, alpha } => method.fit(&s, &t, *lambda, *alpha, &protocol.two_step)?,
        LdaTuning::CrossValidation(cv) => {
            let cv = CvConfig { center: false, ..cv.clone() };
            grid_search(&stack_centered(&x1, &x2), method, target, &cv, &protocol.two_step)?.estimate
        }
        LdaTuning::Validation { lambda_grid, alpha_grid } => {
            if validation.is_empty() {
                return Err(Error::InvalidInput("validation tuning needs validation rows".into()));
            }
            let alphas: &[f64] = if method.uses_alpha() { alpha_grid } else { &[0.0] };
            let mut best: Option<(f64, f64, f64, SymMatrix<f64>)> = None;
            let mut failures = Vec::new();
            for &lambda in lambda_grid {
                for &alpha in alphas {
                    match method.fit(&s, &t, lambda, alpha, &protocol.two_step) {
                        Ok(theta) => {
                            let rate = error_rate(&lda_fit(&x1, &x2, &theta)?, x, labels, validation);
                            let wins = match &best {
                                None => true,
                                Some((r, l, a, _)) => {
                                    rate < *r || (rate == *r && (lambda > *l || (lambda == *l && alpha < *a)))
                                }
                            };
                            if wins {
                                best = Some((rate, lambda, alpha, theta));
                            }
                        }
                        Err(e) => failures.push(GridFailure {
                            lambda,
                            alpha,
                            message: e.to_string(),
                        }),
                    }
                }
            }
            match best {
                Some((_, _, _, theta)) => theta,
                None => return Err(Error::SelectionFailure { failures }),
            }
        }
    };
    lda_fit(&x1, &x2, &theta)
}

/// Repeated random train / validation / test splits; returns the test
/// misclassification rate of every repetition. Labels are 0 for `G1` and 1
/// for `G2`.
pub fn misclassification_experiment(
    x: &Matrix<f64>,
    labels: &[usize],
    method: Method,
    target: &TargetSpec<f64>,
    protocol: &LdaProtocol,
    repetitions: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if labels.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            actual: labels.len(),
        });
    }
    if labels.iter().any(|&l| l > 1) || !labels.contains(&0) || !labels.contains(&1) {
        return Err(Error::InvalidInput("labels must contain both classes 0 and 1 and nothing else".into()));
    }
    let used = protocol.train + protocol.validation;
    if used >= x.rows() {
        return Err(Error::InvalidSplit(format!(
            "{used} training and validation rows leave no test rows out of {}",
            x.rows()
        )));
    }
    (0..repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut order: Vec<usize> = (0..x.rows()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, rep as u64)));
            let (train, rest) = order.split_at(protocol.train);
            let (validation, test) = rest.split_at(protocol.validation);
            let model = fit_repetition(x, labels, train, validation, method, target, protocol)?;
            Ok(error_rate(&model, x, labels, test))
        })
        .collect()
}

/// Numeric features with a two-valued label in the last column.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub x: Matrix<f64>,
    /// 0 for the first label seen, 1 for the other.
    pub labels: Vec<usize>,
    pub class_names: [String; 2],
}

/// Reads a headerless or headed CSV whose last column is the class label.
pub fn read_labeled_csv(path: &Path) -> Result<LabeledData> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut names: Vec<String> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 1;
        if rec.len() < 2 {
            return Err(Error::Input {
                row: line,
                col: 1,
                message: "need at least one feature and a label".into(),
            });
        }
        let features: std::result::Result<Vec<f64>, _> = rec.iter().take(rec.len() - 1).map(str::parse::<f64>).collect();
        let features = match features {
            Ok(f) => f,
            Err(_) if k == 0 => continue,
            Err(_) => {
                let col = rec.iter().position(|c| c.parse::<f64>().is_err()).unwrap_or(0) + 1;
                return Err(Error::Input {
                    row: line,
                    col,
                    message: format!("not a number: {:?}", &rec[col - 1]),
                });
            }
        };
        let label = rec[rec.len() - 1].to_string();
        let idx = match names.iter().position(|n| *n == label) {
            Some(i) => i,
            None if names.len() < 2 => {
                names.push(label);
                names.len() - 1
            }
            None => {
                return Err(Error::Input {
                    row: line,
                    col: rec.len(),
                    message: format!("more than two classes: {label:?}"),
                })
            }
        };
        rows.push(features);
        labels.push(idx);
    }
    if names.len() != 2 {
        return Err(Error::InvalidInput("labeled data must contain exactly two classes".into()));
    }
    let [a, b]: [String; 2] = names.try_into().expect("two names");
    Ok(LabeledData {
        x: Matrix::from_rows(&rows)?,
        labels,
        class_names: [a, b],
    })
}

/// Drops columns that take a single value; returns the kept column indices.
pub fn drop_constant_columns(x: &Matrix<f64>) -> (Matrix<f64>, Vec<usize>) {
    let keep: Vec<usize> = (0..x.cols())
        .filter(|&j| {
            let col = x.column(j);
            col.iter().any(|&v| v != col[0])
        })
        .collect();
    (x.select_cols(&keep), keep)
}

/// `ln(p[t+1] / p[t])` per column.
pub fn log_returns(prices: &Matrix<f64>) -> Result<Matrix<f64>> {
    if prices.rows() < 2 {
        return Err(Error::InvalidInput("log returns need at least two rows of prices".into()));
    }
    for i in 0..prices.rows() {
        for j in 0..prices.cols() {
            let v = prices.get(i, j);
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "price at row {} column {} must be positive, got {v}",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(Matrix::from_fn(prices.rows() - 1, prices.cols(), |i, j| {
        (prices.get(i + 1, j) / prices.get(i, j)).ln()
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeList {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
}

impl EdgeList {
    /// Node strength: sum of incident weights, absolute unless `signed`.
    pub fn strengths(&self, signed: bool) -> Vec<f64> {
        let mut s = vec![0.0; self.nodes.len()];
        for e in &self.edges {
            let w = if signed { e.weight } else { e.weight.abs() };
            s[e.i] += w;
            s[e.j] += w;
        }
        s
    }

    pub fn mean_strength(&self, signed: bool) -> f64 {
        if self.nodes.is_empty() {
            return 0.0;
        }
        self.strengths(signed).iter().sum::<f64>() / self.nodes.len() as f64
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["source", "target", "weight"])?;
        for e in &self.edges {
            w.write_record([&self.nodes[e.i], &self.nodes[e.j], &e.weight.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub const DEFAULT_PRUNE: f64 = 1e-4;

/// `ρᵢⱼ = −θᵢⱼ / √(θᵢᵢ θⱼⱼ)`, dropping edges with `|ρ| < prune`.
pub fn partial_correlations(theta_hat: &SymMatrix<f64>, prune: f64, nodes: Option<&[String]>) -> Result<EdgeList> {
    let p = theta_hat.dim();
    let min = min_eigenvalue(theta_hat)?;
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    let nodes: Vec<String> = match nodes {
        Some(n) if n.len() == p => n.to_vec(),
        Some(n) => {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: n.len(),
            })
        }
        None => (1..=p).map(|k| format!("V{k}")).collect(),
    };
    let mut edges = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            let rho = -theta_hat.get(i, j) / (theta_hat.get(i, i) * theta_hat.get(j, j)).sqrt();
            if rho.abs() >= prune {
                edges.push(Edge { i, j, weight: rho });
            }
        }
    }
    Ok(EdgeList { nodes, edges })
}

/// Dated return series.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub dates: Vec<NaiveDate>,
    pub headers: Vec<String>,
    pub returns: Matrix<f64>,
}

impl ReturnSeries {
    /// Log returns of a price table, dated by the later of the two prices.
    pub fn from_prices(prices: &crate::io::PriceTable) -> Result<Self> {
        Ok(Self {
            dates: prices.dates[1..].to_vec(),
            headers: prices.headers.clone(),
            returns: log_returns(&prices.prices)?,
        })
    }

    fn rows_between(&self, from: NaiveDate, to: NaiveDate) -> Vec<usize> {
        (0..self.dates.len()).filter(|&k| self.dates[k] >= from && self.dates[k] < to).collect()
    }

    pub fn years(&self) -> Vec<i32> {
        let mut y: Vec<i32> = self.dates.iter().map(|d| d.year()).collect();
        y.dedup();
        y
    }

    pub fn rows_in_year(&self, year: i32) -> Vec<usize> {
        (0..self.dates.len()).filter(|&k| self.dates[k].year() == year).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkFitConfig {
    pub method: Method,
    pub cv: CvConfig,
    pub two_step: TwoStepConfig,
    pub prune: f64,
    pub signed_strength: bool,
}

impl Default for NetworkFitConfig {
    fn default() -> Self {
        Self {
            method: Method::TwoStep,
            cv: CvConfig {
                center: true,
                ..CvConfig::default()
            },
            two_step: TwoStepConfig::default(),
            prune: DEFAULT_PRUNE,
            signed_strength: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkFit {
    pub lambda: f64,
    pub alpha: f64,
    pub edges: EdgeList,
}

/// Cross-validated fit on a block of return rows.
pub fn fit_network(
    x: &Matrix<f64>,
    headers: &[String],
    target: &TargetSpec<f64>,
    cfg: &NetworkFitConfig,
) -> Result<NetworkFit> {
    let p = x.cols();
    if x.rows() < p + 1 {
        return Err(Error::InvalidInput(format!("{} rows for {p} variables", x.rows())));
    }
    if let Some(j) = (0..p).find(|&j| {
        let col = x.column(j);
        col.iter().all(|&v| v == col[0])
    }) {
        return Err(Error::InvalidInput(format!("column {} has zero variance", headers[j])));
    }
    let r = grid_search(x, cfg.method, target, &cfg.cv, &cfg.two_step)?;
    Ok(NetworkFit {
        lambda: r.best_lambda,
        alpha: r.best_alpha,
        edges: partial_correlations(&r.estimate, cfg.prune, Some(headers))?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowResult {
    pub start: NaiveDate,
    pub rows: usize,
    /// Fit and mean strength, or the reason the window was skipped.
    pub outcome: std::result::Result<(NetworkFit, f64), String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrengthSeries {
    pub windows: Vec<WindowResult>,
}

impl StrengthSeries {
    /// `window_start,mean_strength,rows,status`; skipped windows have an
    /// empty strength.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["window_start", "mean_strength", "rows", "status"])?;
        for win in &self.windows {
            let (strength, status) = match &win.outcome {
                Ok((_, s)) => (s.to_string(), "ok".to_string()),
                Err(msg) => (String::new(), format!("skipped: {msg}")),
            };
            w.write_record([win.start.to_string(), strength, win.rows.to_string(), status])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Window start dates: every `shift_days` from the first date while the
/// whole window fits inside the observed span.
pub fn window_starts(first: NaiveDate, last: NaiveDate, window_days: i64, shift_days: i64) -> Result<Vec<NaiveDate>> {
    let span_days = (last - first).num_days() + 1;
    if span_days < window_days {
        return Err(Error::Span { span_days, window_days });
    }
    if shift_days <= 0 {
        return Err(Error::InvalidInput("window shift must be positive".into()));
    }
    let count = (span_days - window_days) / shift_days + 1;
    Ok((0..count).map(|k| first + Duration::days(k * shift_days)).collect())
}

/// Mean node strength on rolling windows of `window_days`, moved by
/// `shift_days`. Windows with fewer than `p + 1` rows or a constant column are
/// recorded as skipped.
pub fn rolling_strength(
    series: &ReturnSeries,
    window_days: i64,
    shift_days: i64,
    target: &TargetSpec<f64>,
    cfg: &NetworkFitConfig,
) -> Result<StrengthSeries> {
    let (Some(&first), Some(&last)) = (series.dates.first(), series.dates.last()) else {
        return Err(Error::InvalidInput("empty return series".into()));
    };
    let starts = window_starts(first, last, window_days, shift_days)?;
    let windows = starts
        .par_iter()
        .map(|&start| {
            let rows = series.rows_between(start, start + Duration::days(window_days));
            let x = series.returns.select_rows(&rows);
            let outcome = fit_network(&x, &series.headers, target, cfg)
                .map(|fit| {
                    let s = fit.edges.mean_strength(cfg.signed_strength);
                    (fit, s)
                })
                .map_err(|e| e.to_string());
            WindowResult {
                start,
                rows: rows.len(),
                outcome,
            }
        })
        .collect();
    Ok(StrengthSeries { windows })
}
