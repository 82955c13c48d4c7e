//! End-to-end runs of the `qrl` binary.

use std::path::Path;
use std::process::{Command, Output};

fn qrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrl")).args(args).output().expect("binary runs")
}

fn out_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_flag_and_preset_exit_with_config_code() {
    assert_eq!(qrl(&["train", "--bogus"]).status.code(), Some(1));
    let bad = qrl(&["train", "--preset", "nope"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("nope"));
    assert_eq!(qrl(&["analyze", "perturbation", "--sigma-grid", "0.1,0.2"]).status.code(), Some(1));
}

#[test]
fn presets_are_listed() {
    let out = qrl(&["presets"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for p in ["cartpole_q", "cartpole_pg", "tsp_q", "analysis"] {
        assert!(text.lines().any(|l| l == p), "{p} missing from {text}");
    }
}

#[test]
fn train_then_aggregate() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let out = qrl(&["train", "--preset", "cartpole_pg", "--seeds", "0..2", "--episodes", "3", "--out", out_arg(&run)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run.join("manifest.json").is_file());
    for s in 0..2 {
        let csv = std::fs::read_to_string(run.join(format!("seed_{s}/episodes.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 4);
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest.is_object());

    assert!(qrl(&["aggregate", out_arg(&run)]).status.success());
    let curves = std::fs::read_to_string(run.join("curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 4);
    assert_eq!(std::fs::read_to_string(run.join("runs.csv")).unwrap().lines().count(), 3);
}

#[test]
fn evaluate_writes_one_row_per_eval_sigma() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("ev");
    let out = qrl(&[
        "evaluate", "--preset", "cartpole_q", "--seeds", "0", "--episodes", "2",
        "--eval-sigmas", "0,0.1", "--eval-episodes", "2", "--out", out_arg(&dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("cross_noise.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("train_sigma,eval_sigma,seed,episodes,mean,std"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn perturbation_analysis_writes_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("an");
    let out = qrl(&[
        "analyze", "perturbation", "--sigma-grid", "1e-2:1e-1:log:3", "--samples", "100", "--out", out_arg(&dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("seed_0/perturbation.csv")).unwrap();
    assert!(csv.starts_with("sigma,value,stderr,taylor,bound"));
    let sigmas: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    // the requested grid plus the preset's reference levels, each once
    assert!(sigmas.windows(2).all(|w| w[1] > w[0] * (1.0 + 1e-9)), "{sigmas:?}");
    for s in [0.01, 0.1f64.sqrt() * 0.1, 0.1] {
        assert!(sigmas.iter().any(|v| (v - s).abs() < 1e-12), "{s} missing from {sigmas:?}");
    }
}

#[test]
fn gen_tsp_writes_requested_count() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("tsp");
    assert!(qrl(&["gen-tsp", "--count", "3", "--out", out_arg(&dir)]).status.success());
    assert_eq!(std::fs::read_dir(&dir).unwrap().count(), 3);
}

#[test]
fn fast_verify_criterion_exits_zero() {
    let out = qrl(&["verify", "--criteria", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[PASS]"));
}
