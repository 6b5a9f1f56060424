//! Batch commands behind the `graphridge` binary. Every command reads one
//! [`RunConfig`] section and writes CSV/JSON files into an output directory.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::apps::{
    drop_constant_columns, fit_network, misclassification_experiment, read_labeled_csv, rolling_strength,
    LdaProtocol, LdaTuning, NetworkFitConfig, ReturnSeries, DEFAULT_PRUNE,
};
use crate::dualcheck::{run_experiment, write_experiment_csv, ExperimentConfig};
use crate::error::{Error, Result};
use crate::estimators::{Method, TargetSpec, TwoStepConfig};
use crate::io::{read_data_csv, read_matrix_csv, read_price_csv, write_matrix_csv};
use crate::metrics::LossReport;
use crate::select::{grid_search, write_surface_csv, CvConfig};
use crate::simgen::{derive_seed, make_network, sample_cov, sample_mvn, NetworkModel, NetworkSpec};

/// Shrinkage target as written in a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetConfig {
    Zero,
    Identity,
    ScalarNu,
    ScalarGamma(f64),
    /// Matrix CSV file.
    Custom(PathBuf),
}

impl TargetConfig {
    pub fn to_spec(&self) -> Result<TargetSpec<f64>> {
        Ok(match self {
            TargetConfig::Zero => TargetSpec::Zero,
            TargetConfig::Identity => TargetSpec::Identity,
            TargetConfig::ScalarNu => TargetSpec::ScalarNu,
            TargetConfig::ScalarGamma(g) => TargetSpec::ScalarGamma(*g),
            TargetConfig::Custom(path) => TargetSpec::Custom(read_matrix_csv(path)?),
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            TargetConfig::Zero => "zero",
            TargetConfig::Identity => "identity",
            TargetConfig::ScalarNu => "scalar_nu",
            TargetConfig::ScalarGamma(_) => "scalar_gamma",
            TargetConfig::Custom(_) => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub networks: Vec<NetworkModel>,
    pub p: Vec<usize>,
    pub n: usize,
    pub replications: usize,
    pub methods: Vec<Method>,
    pub targets: Vec<TargetConfig>,
    pub cv: CvConfig,
    pub two_step: TwoStepConfig,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            networks: vec![NetworkModel::CompoundSymmetry],
            p: vec![20],
            n: 50,
            replications: 20,
            methods: vec![Method::Glasso, Method::AltRidgeI, Method::TwoStep],
            targets: vec![TargetConfig::Identity, TargetConfig::ScalarNu],
            cv: CvConfig::default(),
            two_step: TwoStepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    /// Data CSV with a header line, observations as rows.
    pub input: PathBuf,
    pub method: Method,
    pub target: TargetConfig,
    /// Fixed tuning; cross-validation is used when `lambda` is absent.
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub cv: CvConfig,
    pub center: bool,
    pub prune: f64,
    pub two_step: TwoStepConfig,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            method: Method::TwoStep,
            target: TargetConfig::Identity,
            lambda: None,
            alpha: None,
            cv: CvConfig::default(),
            center: true,
            prune: DEFAULT_PRUNE,
            two_step: TwoStepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub count: usize,
    pub from: f64,
    pub to: f64,
    /// `alpha` used by estimators that have one.
    pub alpha: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            count: 50,
            from: 0.1,
            to: 0.9,
            alpha: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaConfig {
    /// CSV whose last column is the class label.
    pub input: PathBuf,
    pub drop_constant: bool,
    pub methods: Vec<Method>,
    pub targets: Vec<TargetConfig>,
    pub protocol: LdaProtocol,
    pub repetitions: usize,
    /// When set, replaces the protocol tuning by a sweep over `lambda`.
    pub sweep: Option<SweepConfig>,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            drop_constant: true,
            methods: vec![Method::TwoStep],
            targets: vec![TargetConfig::ScalarNu],
            protocol: LdaProtocol::default(),
            repetitions: 100,
            sweep: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Price CSV: ISO date, then one column per asset.
    pub input: PathBuf,
    pub target: TargetConfig,
    pub fit: NetworkFitConfig,
    pub window_days: i64,
    pub shift_days: i64,
    pub per_year: bool,
    pub full_sample: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            target: TargetConfig::Identity,
            fit: NetworkFitConfig::default(),
            window_days: 365,
            shift_days: 30,
            per_year: true,
            full_sample: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub simulate: SimulateConfig,
    pub estimate: EstimateConfig,
    pub cv: EstimateConfig,
    pub lda: LdaConfig,
    pub network: NetworkConfig,
    pub dualcheck: ExperimentConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

fn require_input(path: &Path, command: &str) -> Result<()> {
    if path.as_os_str().is_empty() {
        return Err(Error::Config(format!("{command}: \"input\" is required")));
    }
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn mean_sd(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

/// One line of the simulation loss table.
#[derive(Debug, Clone, PartialEq)]
pub struct LossRow {
    pub method: Method,
    pub target: String,
    pub network: NetworkModel,
    pub p: usize,
    pub replication: usize,
    pub outcome: std::result::Result<(LossReport, f64, f64), String>,
}

fn simulate_replication(
    cfg: &SimulateConfig,
    targets: &[(String, TargetSpec<f64>)],
    truth: &crate::simgen::GroundTruth,
    truth_seed: u64,
    replication: usize,
) -> Vec<LossRow> {
    let rep_seed = derive_seed(truth_seed, replication as u64 + 1);
    let data = sample_mvn(truth, cfg.n, rep_seed);
    let mut rows = Vec::with_capacity(cfg.methods.len() * targets.len());
    for &method in &cfg.methods {
        for (label, target) in targets {
            let outcome = data
                .as_ref()
                .map_err(|e| e.to_string())
                .and_then(|x| {
                    let cv = CvConfig {
                        seed: rep_seed,
                        ..cfg.cv.clone()
                    };
                    let r = grid_search(x, method, target, &cv, &cfg.two_step).map_err(|e| e.to_string())?;
                    let losses =
                        LossReport::compute(&truth.sigma, &truth.theta, &r.estimate).map_err(|e| e.to_string())?;
                    Ok((losses, r.best_lambda, r.best_alpha))
                });
            rows.push(LossRow {
                method,
                target: label.clone(),
                network: truth.spec.model,
                p: truth.spec.p,
                replication: replication + 1,
                outcome,
            });
        }
    }
    rows
}

/// Runs the loss study; per-row failures are recorded, not fatal.
pub fn simulate_rows(cfg: &SimulateConfig, seed: u64) -> Result<Vec<LossRow>> {
    cfg.cv.validate()?;
    let targets: Vec<(String, TargetSpec<f64>)> = cfg
        .targets
        .iter()
        .map(|t| Ok((t.label().to_string(), t.to_spec()?)))
        .collect::<Result<_>>()?;

    let mut truths = Vec::new();
    for (k, &model) in cfg.networks.iter().enumerate() {
        for (m, &p) in cfg.p.iter().enumerate() {
            let truth_seed = derive_seed(seed, (k * 1000 + m) as u64);
            let spec = NetworkSpec {
                model,
                p,
                seed: truth_seed,
            };
            truths.push((spec, make_network(spec).map_err(|e| e.to_string())));
        }
    }
    let tasks: Vec<(usize, usize)> = (0..truths.len())
        .flat_map(|t| (0..cfg.replications).map(move |r| (t, r)))
        .collect();

    let rows: Vec<Vec<LossRow>> = tasks
        .par_iter()
        .map(|&(t, r)| match &truths[t] {
            (spec, Ok(truth)) => simulate_replication(cfg, &targets, truth, spec.seed, r),
            (spec, Err(e)) => cfg
                .methods
                .iter()
                .flat_map(|&method| {
                    targets.iter().map(move |(label, _)| LossRow {
                        method,
                        target: label.clone(),
                        network: spec.model,
                        p: spec.p,
                        replication: r + 1,
                        outcome: Err(e.clone()),
                    })
                })
                .collect(),
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

/// `losses.csv` (one row per replication) and `losses_summary.csv`
/// (mean and SD over successful replications).
pub fn cmd_simulate(cfg: &SimulateConfig, seed: u64, out: &Path) -> Result<Vec<LossRow>> {
    fs::create_dir_all(out)?;
    let rows = simulate_rows(cfg, seed)?;

    let mut w = csv_writer(&out.join("losses.csv"))?;
    w.write_record([
        "method", "target", "network", "p", "replication", "kl", "l2", "ql", "sp", "lambda", "alpha", "error",
    ])?;
    for r in &rows {
        let mut rec = vec![
            r.method.label().to_string(),
            r.target.clone(),
            r.network.label().to_string(),
            r.p.to_string(),
            r.replication.to_string(),
        ];
        match &r.outcome {
            Ok((l, lambda, alpha)) => {
                rec.extend([l.kl, l.l2, l.ql, l.sp, *lambda, *alpha].iter().map(f64::to_string));
                rec.push(String::new());
            }
            Err(e) => {
                rec.extend(std::iter::repeat_n(String::new(), 6));
                rec.push(e.clone());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut w = csv_writer(&out.join("losses_summary.csv"))?;
    w.write_record([
        "method", "target", "network", "p", "replications", "failures", "kl_mean", "kl_sd", "l2_mean", "l2_sd",
        "ql_mean", "ql_sd", "sp_mean", "sp_sd",
    ])?;
    let mut keys: Vec<(Method, String, NetworkModel, usize)> = Vec::new();
    for r in &rows {
        let key = (r.method, r.target.clone(), r.network, r.p);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    for key in keys {
        let group: Vec<&LossRow> = rows
            .iter()
            .filter(|r| (r.method, r.target.clone(), r.network, r.p) == key)
            .collect();
        let ok: Vec<&LossReport> = group.iter().filter_map(|r| r.outcome.as_ref().ok().map(|o| &o.0)).collect();
        let mut rec = vec![
            key.0.label().to_string(),
            key.1.clone(),
            key.2.label().to_string(),
            key.3.to_string(),
            ok.len().to_string(),
            (group.len() - ok.len()).to_string(),
        ];
        for pick in [|l: &LossReport| l.kl, |l: &LossReport| l.l2, |l: &LossReport| l.ql, |l: &LossReport| l.sp] {
            if ok.is_empty() {
                rec.extend([String::new(), String::new()]);
            } else {
                let values: Vec<f64> = ok.iter().map(|l| pick(l)).collect();
                let (m, sd) = mean_sd(&values);
                rec.push(m.to_string());
                rec.push(opt(sd));
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateSummary {
    pub method: Method,
    pub target: String,
    pub lambda: f64,
    pub alpha: f64,
    pub cross_validated: bool,
    pub p: usize,
    pub n: usize,
    pub edges: usize,
}

/// Fits one estimator and writes `theta.csv`, `edges.csv` and `estimate.json`.
pub fn cmd_estimate(cfg: &EstimateConfig, seed: u64, out: &Path) -> Result<EstimateSummary> {
    require_input(&cfg.input, "estimate")?;
    let table = read_data_csv(&cfg.input)?;
    let x = &table.data;
    let target = cfg.target.to_spec()?;
    let (theta, lambda, alpha, cross_validated) = match cfg.lambda {
        Some(lambda) => {
            let s = if cfg.center { sample_cov(&x.centered())? } else { sample_cov(x)? };
            let alpha = cfg.alpha.unwrap_or(0.0);
            let t = target.resolve(&s)?;
            (cfg.method.fit(&s, &t, lambda, alpha, &cfg.two_step)?, lambda, alpha, false)
        }
        None => {
            let cv = CvConfig {
                seed,
                center: cfg.center,
                ..cfg.cv.clone()
            };
            let r = grid_search(x, cfg.method, &target, &cv, &cfg.two_step)?;
            write_surface_csv(&out_file(out, "cv_surface.csv")?, &r)?;
            (r.estimate, r.best_lambda, r.best_alpha, true)
        }
    };
    let edges = crate::apps::partial_correlations(&theta, cfg.prune, Some(&table.headers))?;
    write_matrix_csv(&out_file(out, "theta.csv")?, &theta, Some(&table.headers))?;
    edges.write_csv(&out.join("edges.csv"))?;
    let summary = EstimateSummary {
        method: cfg.method,
        target: cfg.target.label().to_string(),
        lambda,
        alpha,
        cross_validated,
        p: x.cols(),
        n: x.rows(),
        edges: edges.edges.len(),
    };
    fs::write(out.join("estimate.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}

fn out_file(out: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(out)?;
    Ok(out.join(name))
}

/// Cross-validation only: writes `cv_surface.csv` and `selection.json`.
pub fn cmd_cv(cfg: &EstimateConfig, seed: u64, out: &Path) -> Result<(f64, f64)> {
    require_input(&cfg.input, "cv")?;
    let table = read_data_csv(&cfg.input)?;
    let cv = CvConfig {
        seed,
        center: cfg.center,
        ..cfg.cv.clone()
    };
    let r = grid_search(&table.data, cfg.method, &cfg.target.to_spec()?, &cv, &cfg.two_step)?;
    write_surface_csv(&out_file(out, "cv_surface.csv")?, &r)?;
    let selection = serde_json::json!({
        "method": cfg.method,
        "target": cfg.target.label(),
        "lambda": r.best_lambda,
        "alpha": r.best_alpha,
    });
    fs::write(out.join("selection.json"), serde_json::to_string_pretty(&selection)? + "\n")?;
    Ok((r.best_lambda, r.best_alpha))
}

/// Sweep values `from..=to` in `count` equal steps.
pub fn sweep_values(s: &SweepConfig) -> Vec<f64> {
    if s.count <= 1 {
        return vec![s.from];
    }
    (0..s.count)
        .map(|k| s.from + (s.to - s.from) * k as f64 / (s.count - 1) as f64)
        .collect()
}

/// Misclassification study. Writes `misclassification.csv`
/// (`method,target,repetition,rate`) or, in sweep mode,
/// `misclassification_sweep.csv` (`method,target,rho,mean_rate,sd_rate`).
pub fn cmd_lda(cfg: &LdaConfig, seed: u64, out: &Path) -> Result<usize> {
    require_input(&cfg.input, "lda")?;
    let data = read_labeled_csv(&cfg.input)?;
    let x = if cfg.drop_constant { drop_constant_columns(&data.x).0 } else { data.x.clone() };
    fs::create_dir_all(out)?;
    let mut written = 0;
    match &cfg.sweep {
        None => {
            let mut w = csv_writer(&out.join("misclassification.csv"))?;
            w.write_record(["method", "target", "repetition", "rate"])?;
            for &method in &cfg.methods {
                for target in &cfg.targets {
                    let rates = misclassification_experiment(
                        &x,
                        &data.labels,
                        method,
                        &target.to_spec()?,
                        &cfg.protocol,
                        cfg.repetitions,
                        seed,
                    )?;
                    for (k, rate) in rates.iter().enumerate() {
                        w.write_record([method.label(), target.label(), &(k + 1).to_string(), &rate.to_string()])?;
                        written += 1;
                    }
                }
            }
            w.flush()?;
        }
        Some(sweep) => {
            let mut w = csv_writer(&out.join("misclassification_sweep.csv"))?;
            w.write_record(["method", "target", "rho", "mean_rate", "sd_rate"])?;
            for &method in &cfg.methods {
                for target in &cfg.targets {
                    let spec = target.to_spec()?;
                    for rho in sweep_values(sweep) {
                        let protocol = LdaProtocol {
                            validation: 0,
                            tuning: LdaTuning::Fixed {
                                lambda: rho,
                                alpha: sweep.alpha,
                            },
                            ..cfg.protocol.clone()
                        };
                        let rates = misclassification_experiment(
                            &x,
                            &data.labels,
                            method,
                            &spec,
                            &protocol,
                            cfg.repetitions,
                            seed,
                        )?;
                        let (m, sd) = mean_sd(&rates);
                        w.write_record([
                            method.label().to_string(),
                            target.label().to_string(),
                            rho.to_string(),
                            m.to_string(),
                            opt(sd),
                        ])?;
                        written += 1;
                    }
                }
            }
            w.flush()?;
        }
    }
    Ok(written)
}

/// Financial network analysis: rolling strength series, per-window edge
/// lists, and optional per-year and full-sample networks.
pub fn cmd_network(cfg: &NetworkConfig, seed: u64, out: &Path) -> Result<usize> {
    require_input(&cfg.input, "network")?;
    let prices = read_price_csv(&cfg.input)?;
    let series = ReturnSeries::from_prices(&prices)?;
    let target = cfg.target.to_spec()?;
    let fit_cfg = NetworkFitConfig {
        cv: CvConfig {
            seed,
            ..cfg.fit.cv.clone()
        },
        ..cfg.fit.clone()
    };
    let strength = rolling_strength(&series, cfg.window_days, cfg.shift_days, &target, &fit_cfg)?;
    let windows_dir = out.join("windows");
    fs::create_dir_all(&windows_dir)?;
    strength.write_csv(&out.join("strength.csv"))?;
    for (k, win) in strength.windows.iter().enumerate() {
        if let Ok((fit, _)) = &win.outcome {
            fit.edges
                .write_csv(&windows_dir.join(format!("window_{:03}_{}.csv", k + 1, win.start)))?;
        }
    }

    let mut extra: Vec<(String, Vec<usize>)> = Vec::new();
    if cfg.per_year {
        for year in series.years() {
            extra.push((format!("year_{year}_edges.csv"), series.rows_in_year(year)));
        }
    }
    if cfg.full_sample {
        extra.push(("full_edges.csv".into(), (0..series.dates.len()).collect()));
    }
    let mut w = csv_writer(&out.join("networks.csv"))?;
    w.write_record(["file", "rows", "lambda", "alpha", "mean_strength", "status"])?;
    for (name, rows) in extra {
        let x = series.returns.select_rows(&rows);
        match fit_network(&x, &series.headers, &target, &fit_cfg) {
            Ok(fit) => {
                fit.edges.write_csv(&out.join(&name))?;
                w.write_record([
                    name,
                    rows.len().to_string(),
                    fit.lambda.to_string(),
                    fit.alpha.to_string(),
                    fit.edges.mean_strength(fit_cfg.signed_strength).to_string(),
                    "ok".into(),
                ])?;
            }
            Err(e) => w.write_record([
                name,
                rows.len().to_string(),
                String::new(),
                String::new(),
                String::new(),
                format!("skipped: {e}"),
            ])?,
        }
    }
    w.flush()?;
    Ok(strength.windows.len())
}

/// Dual-versus-closed-form comparison table, `dualcheck.csv`.
pub fn cmd_dualcheck(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<Vec<crate::dualcheck::DualComparison<f64>>> {
    let rows = run_experiment(cfg, seed)?;
    write_experiment_csv(&out_file(out, "dualcheck.csv")?, &rows)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_roundtrip_and_unknown_keys() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
        assert!(matches!(RunConfig::from_json(r#"{"sed": 1}"#), Err(Error::Config(_))));
        assert!(matches!(
            RunConfig::from_json(r#"{"simulate": {"replication": 3}}"#),
            Err(Error::Config(_))
        ));
        let t: RunConfig =
            RunConfig::from_json(r#"{"estimate": {"target": {"scalar_gamma": 2.0}, "method": "alt_ridge_i"}}"#).unwrap();
        assert_eq!(t.estimate.target, TargetConfig::ScalarGamma(2.0));
    }

    #[test]
    fn sweep_grid() {
        let v = sweep_values(&SweepConfig::default());
        assert_eq!(v.len(), 50);
        assert_eq!(v[0], 0.1);
        assert!((v[49] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn dualcheck_rejects_other_dimensions() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            p: 4,
            ..ExperimentConfig::default()
        };
        assert!(matches!(cmd_dualcheck(&cfg, 0, dir.path()), Err(Error::UnsupportedDimension(4))));
    }
}
