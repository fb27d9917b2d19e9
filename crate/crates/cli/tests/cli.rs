use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bundled_data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic_prices.csv")
}

fn tsxai(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsxai"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env("RUST_LOG", "info")
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> Output {
    let o = tsxai(out, args);
    assert!(
        o.status.success(),
        "tsxai {args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap()
}

fn csv_rows(path: PathBuf) -> Vec<Vec<String>> {
    fs::read_to_string(&path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn ten_prices(dir: &Path) -> PathBuf {
    let path = dir.join("prices.csv");
    let mut s = String::from("date,close\n");
    for i in 0..10 {
        s.push_str(&format!("2021-03-{:02},{}\n", i + 1, 100.0 + (i * i) as f64 * 0.5));
    }
    fs::write(&path, s).unwrap();
    path
}

/// Bundled data, short training, two members.
fn small_run(out: &Path) -> Vec<String> {
    let data = bundled_data();
    let args = vec![
        "--data".to_string(),
        data.to_string_lossy().into_owned(),
        "--members".into(),
        "2".into(),
        "--max-epochs".into(),
        "300".into(),
        "--lags".into(),
        "3".into(),
    ];
    let with = |extra: &[&str]| -> Vec<String> {
        let mut v = args.clone();
        v.extend(extra.iter().map(|s| s.to_string()));
        v
    };
    for step in [&["ingest"][..], &["train"], &["explain", "--kind", "lpd"]] {
        let a = with(step);
        ok(out, &a.iter().map(String::as_str).collect::<Vec<_>>());
    }
    args
}

fn run_with(out: &Path, base: &[String], extra: &[&str]) -> Output {
    let mut a: Vec<&str> = base.iter().map(String::as_str).collect();
    a.extend_from_slice(extra);
    tsxai(out, &a)
}

#[test]
fn ingest_ten_prices_two_lags_gives_eight_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let data = ten_prices(tmp.path());
    let out = tmp.path().join("run");
    let args = ["--data", data.to_str().unwrap(), "--lags", "2", "--no-transform", "ingest"];
    ok(&out, &args);
    let rows = csv_rows(out.join("dataset/dataset.csv"));
    assert_eq!(rows.len(), 1 + 8);
    let info = read_json(out.join("dataset/scaling.json"));
    assert_eq!(info["rows"], 8);

    let first = read_json(out.join("manifest.json"));
    ok(&out, &args);
    let second = read_json(out.join("manifest.json"));
    assert_eq!(first["artifacts"], second["artifacts"]);
    assert_eq!(first["config_hash"], second["config_hash"]);
}

#[test]
fn bad_date_is_a_data_error_naming_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("bad.csv");
    fs::write(&data, "date,close\n2021-01-01,1.0\n2021-13-02,1.1\n2021-01-03,1.2\n").unwrap();
    let o = tsxai(&tmp.path().join("run"), &["--data", data.to_str().unwrap(), "--lags", "1", "ingest"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn wide_net_reports_parameter_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let data = bundled_data();
    let base = ["--data", data.to_str().unwrap(), "--hidden", "100", "--members", "1", "--max-epochs", "1"];
    ok(&out, &[&base[..], &["ingest"]].concat());
    let o = ok(&out, &[&base[..], &["train"]].concat());
    let log = String::from_utf8_lossy(&o.stderr);
    assert!(log.contains("[6, 100, 1]"), "{log}");
    assert!(log.contains("700 weights, 101 biases"), "{log}");
}

#[test]
fn training_is_reproducible_and_explain_shapes_match() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let base = small_run(&a);
    small_run(&b);
    for seed in [0, 1] {
        let rel = format!("ensemble/member_{seed}.json");
        assert_eq!(fs::read(a.join(&rel)).unwrap(), fs::read(b.join(&rel)).unwrap());
    }

    let member: Vec<_> = (0..2).map(|s| csv_rows(a.join(format!("explain/lpd/member_{s}.csv")))).collect();
    let mean = csv_rows(a.join("explain/lpd/mean.csv"));
    assert_eq!(mean[0], ["date", "intercept", "lag_1", "lag_2", "lag_3"]);
    for name in ["sigma", "tstat"] {
        let m = csv_rows(a.join(format!("explain/lpd/{name}.csv")));
        assert_eq!(m.len(), mean.len());
        assert!(m.iter().all(|r| r.len() == 5));
    }
    for t in 1..mean.len() {
        for c in 1..5 {
            let x: f64 = member[0][t][c].parse().unwrap();
            let y: f64 = member[1][t][c].parse().unwrap();
            let m: f64 = mean[t][c].parse().unwrap();
            assert!((m - (x + y) / 2.0).abs() <= 1e-12 * m.abs().max(1.0));
        }
    }

    ok(&a, &base.iter().map(String::as_str).chain(["explain", "--kind", "qpd"]).collect::<Vec<_>>());
    let qpd = csv_rows(a.join("explain/qpd/member_0.csv"));
    assert_eq!(qpd.len(), mean.len());
    assert!(qpd.iter().all(|r| r.len() == 1 + 3));
}

#[test]
fn signals_backtest_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let base = small_run(&out);

    for preset in ["btc-rm", "fraud", "sp-crisis"] {
        let o = run_with(&out, &base, &["signals", "--preset", preset]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let drift = csv_rows(out.join(format!("signals/{preset}/drift.csv")));
        assert_eq!(drift.len(), 5);
    }
    let manifest = read_json(out.join("manifest.json"));
    let presets = manifest["signal_presets"].as_object().unwrap();
    assert_eq!(presets.len(), 3);
    assert_eq!(presets["fraud"]["window"], 250);

    for strategy in ["sign", "exposure", "long-short"] {
        let o = run_with(&out, &base, &["backtest", "--strategy", strategy]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let metrics = read_json(out.join(format!("backtest/{strategy}/metrics.json")));
        for key in ["mean", "benchmark"] {
            let m = metrics[key].as_object().unwrap();
            assert!(m.contains_key("sharpe") && m.contains_key("max_drawdown") && m.contains_key("mse"));
        }
        assert_eq!(metrics["members"].as_array().unwrap().len(), 2);
    }
    let o = run_with(&out, &base, &["report"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = read_json(out.join("report/summary.json"));
    assert_eq!(summary["heuristic"]["weights"].as_array().unwrap().len(), 3);
}

#[test]
fn full_exposure_matches_buy_and_hold() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let base = small_run(&out);
    let rows = csv_rows(out.join("dataset/dataset.csv")).len() - 1;
    let config = tmp.path().join("always-in.toml");
    fs::write(&config, format!("q = 0.001\nwindow = {}\n", rows - 1)).unwrap();
    let cfg = config.to_str().unwrap();
    let o = run_with(&out, &base, &["--config", cfg, "backtest", "--strategy", "exposure"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = out.join("backtest/exposure");
    assert_eq!(fs::read(dir.join("mean.csv")).unwrap(), fs::read(dir.join("benchmark.csv")).unwrap());

    fs::write(&config, format!("window = {rows}\n")).unwrap();
    let o = run_with(&out, &base, &["--config", cfg, "signals"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("window"));
}

#[test]
fn missing_artifacts_are_listed() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tsxai(&tmp.path().join("empty"), &["signals"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("missing artifacts"), "{err}");
    assert!(err.contains("dataset/dataset.csv") && err.contains("dataset/scaling.json"), "{err}");
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    assert_eq!(tsxai(&out, &["explain", "--kind", "nonsense"]).status.code(), Some(1));

    let config = tmp.path().join("typo.toml");
    fs::write(&config, "lagz = 3\n").unwrap();
    let o = tsxai(&out, &["--config", config.to_str().unwrap(), "ingest"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lagz"));
}

#[test]
fn out_dir_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let data = ten_prices(tmp.path());
    let target = tmp.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_tsxai"))
        .args(["--data", data.to_str().unwrap(), "--lags", "2", "ingest"])
        .env("TSXAI_OUT", &target)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(target.join("manifest.json").is_file());
}
