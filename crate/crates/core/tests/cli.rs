use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

const SMALL_CV: &str = r#"{"folds": 3, "lambda_grid": [0.05, 0.5, 5.0], "alpha_grid": [0.0, 0.5]}"#;

fn run(dir: &Path, args: &[&str], config: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_graphridge"));
    cmd.args(args).arg("--out").arg(dir.join("out"));
    if let Some(text) = config {
        let path = dir.join("config.json");
        fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn error_json(out: &Output) -> Value {
    assert!(!out.status.success(), "expected failure");
    let stderr = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(stderr.trim()).unwrap_or_else(|_| panic!("stderr is not JSON: {stderr}"))
}

fn assert_ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}

fn write_data(path: &Path, rows: usize, cols: usize, seed: u64) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let header: Vec<String> = (1..=cols).map(|j| format!("x{j}")).collect();
    let mut text = header.join(",") + "\n";
    for _ in 0..rows {
        let line: Vec<String> = (0..cols).map(|_| r.random_range(-1.0..1.0f64).to_string()).collect();
        text += &(line.join(",") + "\n");
    }
    fs::write(path, text).unwrap();
}

/// Daily prices for `days` consecutive days from 2020-01-01. Column `c` is
/// held flat for the first `flat_days` days.
fn write_prices(path: &Path, days: i64, flat_days: i64) {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    let mut prices = [100.0f64, 50.0, 10.0];
    let mut text = String::from("date,a,b,c\n");
    for d in 0..days {
        let common = r.random_range(-0.02..0.02);
        prices[0] *= f64::exp(common + r.random_range(-0.01..0.01));
        prices[1] *= f64::exp(0.5 * common + r.random_range(-0.01..0.01));
        if d >= flat_days {
            prices[2] *= f64::exp(r.random_range(-0.01..0.01));
        }
        text += &format!("{},{},{},{}\n", start + Duration::days(d), prices[0], prices[1], prices[2]);
    }
    fs::write(path, text).unwrap();
}

#[test]
fn malformed_cell_reports_row_and_column() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("data.csv");
    fs::write(&input, "a,b\n1.0,2.0\n3.0,abc\n0.5,0.1\n").unwrap();
    let cfg = format!(r#"{{"estimate": {{"input": {:?}, "lambda": 0.5}}}}"#, input);
    let err = error_json(&run(dir.path(), &["estimate"], Some(&cfg)));
    assert_eq!(err["error"], "InputError");
    let msg = err["message"].as_str().unwrap();
    assert!(msg.contains("row 3") && msg.contains("column 2"), "{msg}");
}

#[test]
fn single_variable_estimate() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("data.csv");
    write_data(&input, 30, 1, 1);
    let cfg = format!(r#"{{"estimate": {{"input": {:?}, "method": "alt_ridge_i", "lambda": 0.5}}}}"#, input);
    assert_ok(&run(dir.path(), &["estimate"], Some(&cfg)));
    let theta = fs::read_to_string(dir.path().join("out/theta.csv")).unwrap();
    assert_eq!(theta.lines().count(), 2);
    let value: f64 = theta.lines().nth(1).unwrap().parse().unwrap();
    assert!(value > 0.0);
    let edges = data_rows(&dir.path().join("out/edges.csv"));
    assert!(edges.is_empty());
}

#[test]
fn estimate_with_cross_validation_writes_surface() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("data.csv");
    write_data(&input, 40, 4, 2);
    let cfg = format!(r#"{{"estimate": {{"input": {:?}, "cv": {SMALL_CV}}}}}"#, input);
    assert_ok(&run(dir.path(), &["estimate"], Some(&cfg)));
    assert_eq!(data_rows(&dir.path().join("out/cv_surface.csv")).len(), 6);
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/estimate.json")).unwrap()).unwrap();
    assert_eq!(summary["cross_validated"], true);
    assert_eq!(summary["p"], 4);
}

#[test]
fn three_years_of_prices_give_25_windows_and_skip_flat_ones() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("prices.csv");
    write_prices(&input, 1095, 400);
    let cfg = format!(
        r#"{{"network": {{"input": {:?}, "fit": {{"cv": {SMALL_CV}}}}}}}"#,
        input
    );
    assert_ok(&run(dir.path(), &["network"], Some(&cfg)));
    let rows = data_rows(&dir.path().join("out/strength.csv"));
    assert_eq!(rows.len(), 25);
    assert!(rows[0][3].starts_with("skipped"), "{:?}", rows[0]);
    assert!(rows[0][1].is_empty());
    assert_eq!(rows[24][3], "ok");
    let written = fs::read_dir(dir.path().join("out/windows")).unwrap().count();
    let ok = rows.iter().filter(|r| r[3] == "ok").count();
    assert_eq!(written, ok);
    for year in [2020, 2021, 2022] {
        let networks = data_rows(&dir.path().join("out/networks.csv"));
        assert!(networks.iter().any(|r| r[0] == format!("year_{year}_edges.csv")));
    }
}

#[test]
fn short_price_history_is_a_span_error() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("prices.csv");
    write_prices(&input, 200, 0);
    let cfg = format!(r#"{{"network": {{"input": {:?}}}}}"#, input);
    let err = error_json(&run(dir.path(), &["network"], Some(&cfg)));
    assert_eq!(err["error"], "SpanError");
}

#[test]
fn simulate_writes_rows_and_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = format!(r#"{{"simulate": {{"p": [5], "n": 30, "cv": {SMALL_CV}}}}}"#);
    assert_ok(&run(dir.path(), &["simulate", "--seed", "3"], Some(&cfg)));
    let rows = data_rows(&dir.path().join("out/losses.csv"));
    let summary = data_rows(&dir.path().join("out/losses_summary.csv"));
    assert_eq!(rows.len(), 20 * 6);
    assert_eq!(summary.len(), 6);
    assert!(rows.iter().all(|r| r.last().unwrap().is_empty()), "unexpected failures");
}

#[test]
fn dualcheck_rejects_p4() {
    let dir = TempDir::new().unwrap();
    let err = error_json(&run(dir.path(), &["dualcheck"], Some(r#"{"dualcheck": {"p": 4}}"#)));
    assert_eq!(err["error"], "UnsupportedDimension");
}

#[test]
fn dualcheck_default_writes_fifteen_rows() {
    let dir = TempDir::new().unwrap();
    assert_ok(&run(dir.path(), &["dualcheck"], None));
    let rows = data_rows(&dir.path().join("out/dualcheck.csv"));
    assert_eq!(rows.len(), 15);
    assert!(rows.iter().all(|r| r[1..].iter().all(|v| v.parse::<f64>().unwrap() < 1e-2)));
}

#[test]
fn configuration_errors() {
    let dir = TempDir::new().unwrap();
    let err = error_json(&run(dir.path(), &["dualcheck"], Some(r#"{"dualchek": {}}"#)));
    assert_eq!(err["error"], "ConfigError");
    let err = error_json(&run(dir.path(), &["dualcheck", "--threads", "0"], None));
    assert_eq!(err["error"], "ConfigError");
    let err = error_json(&run(dir.path(), &["estimate"], None));
    assert_eq!(err["error"], "ConfigError");
}
