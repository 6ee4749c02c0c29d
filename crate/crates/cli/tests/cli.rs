use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ncr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncr"))
        .args(args)
        .env_remove("NCR_SEED")
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn ncr")
}

fn ok(args: &[&str]) -> String {
    let out = ncr(args);
    assert!(
        out.status.success(),
        "ncr {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        ok(&["generate", "--n", "50", "--variance", "5", "--seed", "9", "--out", s(p)]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = dir.path().join("c.csv");
    ok(&["generate", "--n", "50", "--variance", "5", "--seed", "10", "--out", s(&c)]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn generated_slope_is_recoverable() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    ok(&["generate", "--n", "1000", "--variance", "0.1", "--out", s(&path)]);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y"));
    let pts: Vec<(f64, f64)> = lines
        .map(|l| {
            let (x, y) = l.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect();
    assert_eq!(pts.len(), 1000);
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    assert!((slope - 2.0).abs() < 0.01, "slope {slope}");
}

#[test]
fn ols_baseline_is_near_the_noise_floor() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let line = ok(&["benchmark", "--n", "1000", "--variance", "5", "--model", "ols", "--out", s(&out)]);
    assert_eq!(line.lines().count(), 1);
    let report = read_json(&out.join("report.json"));
    let run = &report["runs"][0];
    let mse = run["test_metrics"]["mse"].as_f64().unwrap();
    let floor = run["mmse"].as_f64().unwrap();
    assert!((mse - floor).abs() <= 0.25 * floor, "test mse {mse}, mmse {floor}");
    assert_eq!(run["augmented"], false);
    assert_eq!(report["metadata"]["grid"], "full");
    assert!(out.join("report.csv").exists() && out.join("model.json").exists());
}

#[test]
fn missing_dataset_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let missing = dir.path().join("nope.csv");
    let res = ncr(&["benchmark", "--dataset", s(&missing), "--target", "y", "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());

    let csv = dir.path().join("d.csv");
    std::fs::write(&csv, "a,b\n1,2\n3,4\n").unwrap();
    let res = ncr(&["benchmark", "--dataset", s(&csv), "--target", "y", "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn coarse_runs_are_labelled_and_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, workers) in [(&a, "1"), (&b, "2")] {
        ok(&[
            "benchmark", "--n", "50", "--variance", "1", "--model", "lasso", "--augmented", "--coarse-grid",
            "--workers", workers, "--dump-cells", "--out", s(out),
        ]);
    }
    for f in ["report.json", "report.csv", "model.json", "cells.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let report = read_json(&a.join("report.json"));
    assert_eq!(report["metadata"]["grid"], "coarse");
    let hp = &report["runs"][0]["hyperparams"];
    assert!(hp["q"].is_f64() && hp["eps_stim"].is_f64() && hp["alpha"].is_f64());
    // header plus 15 q x 9 eps x 3 alpha cells
    let cells = std::fs::read_to_string(a.join("cells.csv")).unwrap();
    assert_eq!(cells.lines().count(), 1 + 15 * 9 * 3);
}

#[test]
fn csv_dataset_with_categorical_column() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("houses.csv");
    let mut text = String::from("size,colour,age,price\n");
    for i in 0..40 {
        let size = 50.0 + 3.0 * i as f64;
        let age = (i * 7 % 13) as f64;
        let colour = ["red", "blue", "green"][i % 3];
        text += &format!("{size},{colour},{age},{}\n", 2.0 * size - age + (i % 4) as f64);
    }
    text += "70,red,,100\n";
    std::fs::write(&csv, text).unwrap();
    let out = dir.path().join("run");
    ok(&["benchmark", "--dataset", s(&csv), "--target", "price", "--model", "ridge", "--alpha-grid", "small", "--out", s(&out)]);
    let report = read_json(&out.join("report.json"));
    let run = &report["runs"][0];
    assert_eq!(run["dataset_id"], "houses");
    assert_eq!(run["objective"], "r2");
    assert!(run["mmse"].is_null());
    assert!(run["test_metrics"]["r2"].as_f64().unwrap() > 0.95);
    assert_eq!(run["train_metrics"]["n"].as_u64().unwrap() + run["test_metrics"]["n"].as_u64().unwrap(), 40);
}

#[test]
fn report_merges_runs_and_computes_boost() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("base");
    let aug = dir.path().join("aug");
    let common = ["--n", "60", "--variance", "1", "--model", "ridge", "--coarse-grid"];
    ok(&[&["benchmark"][..], &common, &["--out", s(&base)]].concat());
    ok(&[&["benchmark"][..], &common, &["--augmented", "--out", s(&aug)]].concat());
    let merged = dir.path().join("merged");
    let stdout = ok(&[
        "report",
        "--input",
        s(&base.join("report.json")),
        "--input",
        s(&aug.join("report.json")),
        "--out",
        s(&merged),
    ]);
    assert!(stdout.contains("ridge"));
    let report = read_json(&merged.join("report.json"));
    assert_eq!(report["runs"].as_array().unwrap().len(), 2);
    let entry = &report["boost_summary"][0]["summary"]["per_dataset"][0];
    let (b, a) = (entry["baseline"].as_f64().unwrap(), entry["augmented"].as_f64().unwrap());
    let boost = entry["boost"].as_f64().unwrap();
    assert!((boost - (a - b) / b).abs() < 1e-12);
    let mse_vs_n = std::fs::read_to_string(merged.join("mse_vs_n.csv")).unwrap();
    assert!(mse_vs_n.lines().count() >= 2);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out_cfg = dir.path().join("from-config");
    std::fs::write(
        &cfg,
        format!("model = \"lasso\"\nn = 30\nvariance = 0.1\nseed = 5\nout = \"{}\"\n", out_cfg.display()),
    )
    .unwrap();
    let out_flag = dir.path().join("from-flag");
    ok(&["benchmark", "--config", s(&cfg), "--model", "ols", "--out", s(&out_flag)]);
    assert!(!out_cfg.exists());
    let report = read_json(&out_flag.join("report.json"));
    assert_eq!(report["metadata"]["seed"], 5);
    assert_eq!(report["runs"][0]["model"], "ols");
    assert_eq!(report["runs"][0]["synthetic"]["n"], 30);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let run = |out: &Path, env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_ncr"));
        cmd.args(["generate", "--n", "10", "--out", s(out)]).env_remove("NCR_SEED");
        if let Some(v) = env {
            cmd.env("NCR_SEED", v);
        }
        assert!(cmd.output().unwrap().status.success());
    };
    run(&a, Some("7"));
    ok(&["generate", "--n", "10", "--seed", "7", "--out", s(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    run(&b, None);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn matrix_subset_records_every_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    ok(&["matrix", "--coarse-grid", "--sizes", "10", "--models", "ols,ridge", "--out", s(&out)]);
    let report = read_json(&out.join("report.json"));
    // 6 datasets of size 10 (3 variances x 2 slopes), 2 models, baseline + augmented
    let runs = report["runs"].as_array().unwrap().len();
    let failures = report["failures"].as_array().unwrap().len();
    assert_eq!(runs + failures, 6 * 2 * 2);
    assert!(out.join("report.csv").exists() && out.join("mse_vs_n.csv").exists());
}
