//! End-to-end tests for the `gridloss` binary: every exit path must print
//! JSON, and exit codes must distinguish gradcheck failures, blocked
//! gradients, and divergence from ordinary errors.

use gridloss::tensor::io::save_grd1;
use gridloss::{GridTensor, Shape};
use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gridloss"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stdout);
    let line = text.lines().last().unwrap_or_else(|| {
        panic!("no stdout; stderr: {}", String::from_utf8_lossy(&out.stderr))
    });
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stdout not JSON ({e}): {line}"))
}

fn grid(rows: usize, cols: usize, data: Vec<f64>) -> GridTensor {
    GridTensor::new(Shape::new(1, rows, cols, 1).unwrap(), data).unwrap()
}

fn save(dir: &Path, name: &str, t: &GridTensor) -> String {
    let path = dir.join(name);
    save_grd1(&path, t).unwrap();
    path.to_string_lossy().into_owned()
}

/// Shifted diagonal band on a 7x7 grid: disjoint at mask 1, fully
/// overlapping densities at large masks.
fn band_pair() -> (GridTensor, GridTensor) {
    let mut truth = vec![0.0; 49];
    let mut pred = vec![0.0; 49];
    for (r, c) in [(2usize, 3usize), (3, 4), (4, 5)] {
        truth[r * 7 + c] = 1.0;
        pred[r * 7 + (c - 1)] = 1.0;
    }
    (grid(7, 7, truth), grid(7, 7, pred))
}

#[test]
fn evaluate_identical_fields_hits_perfect_scores() {
    let dir = tempfile::tempdir().unwrap();
    let data: Vec<f64> = (0..144).map(|i| 0.05 + 0.9 * (i as f64) / 143.0).collect();
    let t = grid(12, 12, data);
    let path = save(dir.path(), "field.grd1", &t);
    let out = run(&[
        "evaluate", "--truth", &path, "--pred", &path, "--loss", "mse", "--loss", "fss",
        "--loss", "ssim",
    ]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["mse"].as_f64().unwrap(), 0.0);
    assert!((v["fss"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((v["ssim"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn evaluate_mismatched_shapes_exits_2_with_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let a = save(dir.path(), "a.grd1", &grid(4, 4, vec![0.0; 16]));
    let b = save(dir.path(), "b.grd1", &grid(4, 5, vec![0.0; 20]));
    let out = run(&["evaluate", "--truth", &a, "--pred", &b, "--loss", "mse"]);
    assert_eq!(out.status.code(), Some(2));
    let v = stdout_json(&out);
    assert_eq!(v["error"]["code"], "SHAPE_MISMATCH");
}

#[test]
fn evaluate_unknown_loss_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let a = save(dir.path(), "a.grd1", &grid(4, 4, vec![0.0; 16]));
    let out = run(&["evaluate", "--truth", &a, "--pred", &a, "--loss", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stdout_json(&out)["error"]["code"], "UNKNOWN_LOSS");
}

#[test]
fn bad_flag_exits_2_with_json() {
    let out = run(&["evaluate", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stdout_json(&out)["error"]["code"], "PARSE_ERROR");
}

#[test]
fn gradcheck_mse_passes() {
    let out = run(&["gradcheck", "--loss", "mse", "--trials", "3"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["pass"], true);
    assert_eq!(v["reports"].as_array().unwrap().len(), 3);
}

#[test]
fn gradcheck_hard_mode_exits_3_blocked() {
    let out = run(&["gradcheck", "--loss", "csi:mode=hard", "--trials", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stdout_json(&out)["error"]["code"], "GRADIENT_BLOCKED_LOSS");
}

#[test]
fn train_demo_inline_config_converges() {
    // one pixel, x = 1, y = 0.4: gradient descent drives w + b -> 0.4
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "model": { "rows": 1, "cols": 1 },
        "data": { "samples": 1, "x": [1.0], "y": [0.4] },
        "train": {
            "batch_size": 1,
            "learning_rate": 0.2,
            "phases": [{ "loss": { "name": "mse" }, "epochs": 40 }]
        }
    });
    let path = dir.path().join("demo.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = run(&["train-demo", "--config", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).expect("every line is JSON"))
        .collect();
    assert_eq!(lines.len(), 41);
    let first = lines[0]["pure_loss"].as_f64().unwrap();
    let last = lines[39]["pure_loss"].as_f64().unwrap();
    assert!(last < first * 1e-6, "loss should collapse: {first} -> {last}");
    let summary = &lines[40]["summary"];
    let w = summary["final_weights"][0].as_f64().unwrap();
    let b = summary["final_bias"][0].as_f64().unwrap();
    assert!((w + b - 0.4).abs() < 1e-6, "w + b = {}", w + b);
}

#[test]
fn train_demo_zero_learning_rate_keeps_loss_constant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "model": { "rows": 2, "cols": 2 },
        "data": { "samples": 2, "x": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
                   "y": [0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1] },
        "train": {
            "batch_size": 2,
            "learning_rate": 0.0,
            "phases": [{ "loss": { "name": "mse" }, "epochs": 5 }]
        }
    });
    let path = dir.path().join("flat.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = run(&["train-demo", "--config", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let losses: Vec<f64> = text
        .lines()
        .filter_map(|l| serde_json::from_str::<Value>(l).ok())
        .filter_map(|v| v["pure_loss"].as_f64())
        .collect();
    assert_eq!(losses.len(), 5);
    assert!(losses.iter().all(|&l| l == losses[0]));
}

#[test]
fn train_demo_builtin_two_phase_runs() {
    let out = bin()
        .args(["train-demo"])
        .env("GRIDLOSS_SEED", "7")
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    // 5 + 10 epochs plus the summary line; second phase flagged at epoch 5
    assert_eq!(lines.len(), 16);
    assert_eq!(lines[5]["phase_start"], true);
    assert_eq!(lines[5]["loss_name"], "mse_fewer_misses");
    assert!(lines[15]["summary"].is_object());
}

#[test]
fn fss_sweep_band_pair_is_nondecreasing() {
    let dir = tempfile::tempdir().unwrap();
    let (truth, pred) = band_pair();
    let t = save(dir.path(), "t.grd1", &truth);
    let p = save(dir.path(), "p.grd1", &pred);
    let out = run(&[
        "fss-sweep", "--truth", &t, "--pred", &p, "--masks", "1,3,5", "--mode", "hard",
    ]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    let fss: Vec<f64> = v["fss"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert_eq!(fss.len(), 3);
    assert_eq!(fss[0], 0.0); // disjoint at grid scale
    assert!(fss[0] <= fss[1] && fss[1] <= fss[2]);
    assert!(fss[2] > 0.9);
}
