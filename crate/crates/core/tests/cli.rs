use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn mtjx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtjx")).args(args).output().unwrap()
}

fn data_dir() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").display().to_string()
}

fn error_json(out: &Output) -> Value {
    let v: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    assert!(v["error"]["kind"].is_string() && v["error"]["message"].is_string());
    v
}

fn train_args<'a>(data: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![
        "train", "--scenario", "st-1r", "--dataset", "sonar", "--arch", "1L", "--phases", "4", "--variation", "0.05",
        "--seed", "3", "--epochs", "2", "--reference-epochs", "2", "--replicates", "2", "--data-dir", data, "--out", out,
    ]
}

#[test]
fn train_writes_metrics_deterministically() {
    let data = data_dir();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let pa = a.path().join("run");
    let pb = b.path().join("run");
    let out = mtjx(&train_args(&data, pa.to_str().unwrap()));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["config"]["variation"], 0.05);
    assert!(mtjx(&train_args(&data, pb.to_str().unwrap())).status.success());
    for f in ["trace.csv", "summary.json", "crossbars/r0-layer0.txt", "crossbars/r1-layer0.txt"] {
        assert_eq!(std::fs::read(pa.join(f)).unwrap(), std::fs::read(pb.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    let text = format!(
        "scenario = \"rv\"\ndataset = \"wbcd\"\narch = \"2L10\"\nepochs = 1\nreference_epochs = 2\ndata_dir = {:?}\n",
        data_dir()
    );
    std::fs::write(&cfg, text).unwrap();
    let out = mtjx(&["train", "--config", cfg.to_str().unwrap(), "--seed", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["config"]["seed"], 5);
    assert_eq!(summary["shape"], serde_json::json!([30, 10, 1]));
}

#[test]
fn sweep_over_phases() {
    let data = data_dir();
    let dir = tempfile::tempdir().unwrap();
    let out = mtjx(&[
        "sweep", "--axis", "phases", "--scenario", "st-1r", "--dataset", "sonar", "--arch", "1L", "--epochs", "1",
        "--reference-epochs", "1", "--data-dir", &data, "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(table["axis"], "phases");
    assert_eq!(table["rows"].as_array().unwrap().len(), 2);
    assert!(Path::new(&dir.path().join("point-0/trace.csv")).exists());
}

#[test]
fn calibrate_reports_fits() {
    let dir = tempfile::tempdir().unwrap();
    let dev = dir.path().join("device.toml");
    let out = mtjx(&["calibrate", "--direction", "p2ap", "--out", dev.to_str().unwrap()]);
    assert!(out.status.success());
    let fit: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(fit["ic0"].as_f64().unwrap() > 5e-5);
    let params = mtj_xbar::device::DeviceParams::load(&dev).unwrap();
    assert_eq!(params, mtj_xbar::device::DeviceParams::default());
}

#[test]
fn failures_emit_json_and_nonzero_exit() {
    let cases: [(Vec<&str>, &str, i32); 5] = [
        (vec!["train", "--scenario", "st-1t1r", "--dataset", "sonar", "--phases", "4"], "config", 2),
        (vec!["train", "--scenario", "nope", "--dataset", "sonar"], "config", 2),
        (vec!["train", "--dataset", "sonar"], "config", 2),
        (vec!["frobnicate"], "usage", 2),
        (vec!["train", "--scenario", "rv", "--dataset", "sonar", "--data-dir", "/nonexistent"], "dataset", 1),
    ];
    for (args, kind, code) in cases {
        let out = mtjx(&args);
        assert_eq!(out.status.code(), Some(code), "{args:?}");
        assert_eq!(error_json(&out)["error"]["kind"], kind, "{args:?}");
    }
}
