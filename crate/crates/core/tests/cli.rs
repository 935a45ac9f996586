use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qkernel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkernel"))
        .args(args)
        .env("QKERNEL_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = r#"{
  "seed": 3,
  "register": {"n_ancillas": 3},
  "data": {"n_train": 8, "eval_points": 20, "decision_grid": 4},
  "kernel": {"profile_points": 11, "slice_points": 3, "symmetry_samples": 4},
  "entangle": {"grid_size": 4, "n_random": 6, "n_train": 12, "sweep_seeds": 2}
}"#;

#[test]
fn every_task_writes_its_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let expected: [(&str, &[&str]); 8] = [
        ("kernel-1d", &["profile.csv"]),
        ("kernel-2d", &["slices.csv"]),
        ("regress-sine", &["training.csv", "predictions.csv", "model.json"]),
        ("regress-poly7", &["training.csv", "predictions.csv", "model.json"]),
        ("classify-circles", &["training.csv", "holdout.csv", "decision_grid.csv", "model.json"]),
        ("classify-moons", &["training.csv", "holdout.csv", "decision_grid.csv", "model.json"]),
        ("entangle-classify", &["grid.csv", "sweep.csv", "report.json"]),
        ("baseline", &["baseline_grid.csv"]),
    ];
    for (task, files) in expected {
        let out_dir = tmp.path().join(task);
        let out = qkernel(&[task, "--config", &cfg, "--out-dir", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{task}: {}", String::from_utf8_lossy(&out.stderr));
        let stdout: Value = serde_json::from_slice(&out.stdout).expect("metrics JSON on stdout");
        assert!(stdout.is_object());
        for f in files.iter().chain(&["config.json", "metrics.json"]) {
            assert!(out_dir.join(f).is_file(), "{task} missing {f}");
        }
        let metrics: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("metrics.json")).unwrap()).unwrap();
        assert_eq!(metrics, stdout);
        let echo: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("config.json")).unwrap()).unwrap();
        assert_eq!(echo["task"], task);
        assert_eq!(echo["config"]["seed"], 3);
    }
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let run = |seed: &str, dir: &str| {
        let d = tmp.path().join(dir);
        let out = qkernel(&["classify-moons", "--config", &cfg, "--seed", seed, "--out-dir", d.to_str().unwrap()]);
        assert!(out.status.success());
        std::fs::read_to_string(d.join("training.csv")).unwrap()
    };
    assert_eq!(run("5", "a"), run("5", "b"));
    assert_ne!(run("5", "c"), run("6", "d"));
}

#[test]
fn csv_header_and_float_format() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let d = tmp.path().join("k");
    assert!(qkernel(&["kernel-1d", "--config", &cfg, "--out-dir", d.to_str().unwrap()]).status.success());
    let text = std::fs::read_to_string(d.join("profile.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("delta,value"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "-3.1415926535897931e0");
    assert_eq!(text.lines().count(), 12);
}

#[test]
fn config_errors_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let out_dir = out_dir.to_str().unwrap();
    for bad in [
        r#"{"seed": 1, "ridge": 0.1}"#,
        r#"{"learner": {"ridge": -1}}"#,
        r#"{"register": {"n_ancillas": 0}}"#,
        r#"{"entangle": {"n_pairs": 9}}"#,
        "not json",
    ] {
        let cfg = write_config(tmp.path(), bad);
        let out = qkernel(&["kernel-1d", "--config", &cfg, "--out-dir", out_dir]);
        assert_eq!(out.status.code(), Some(2), "{bad}");
        let err: Value = serde_json::from_slice(&out.stderr).expect("error JSON on stderr");
        assert_eq!(err["error"], "config", "{bad}");
    }
    let out = qkernel(&["kernel-3d", "--out-dir", out_dir]);
    assert_eq!(out.status.code(), Some(2));
    let out = qkernel(&["kernel-1d", "--config", "/nonexistent/config.json"]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn unwritable_output_exits_with_code_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out_dir = blocker.join("sub");
    let out = qkernel(&["kernel-1d", "--config", &cfg, "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "io");
}
