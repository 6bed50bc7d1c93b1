//! End-to-end runs of the `ttmc` binary.

use std::fs;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use ttmc_core::tt::io;

fn ttmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ttmc")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn solve_small_toy_matches_oracle() {
    let out = ttmc(&[
        "solve", "--model", "overflow", "--d", "2", "--cap", "1", "--method", "amen", "--tol-orders", "10",
        "--check-oracle",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["report"]["status"], "converged");
    assert!(v["oracle_max_error"].as_f64().unwrap() <= 1e-6);
    assert_eq!(v["solution_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn multigrid_methods_solve_from_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("model.json");
    fs::write(&spec, r#"{"kind": "overflowpersim", "d": 3, "cap": 4}"#).unwrap();
    for method in ["multigrid", "multigrid-amen"] {
        let out = ttmc(&[
            "solve", "--spec-file", spec.to_str().unwrap(), "--method", method, "--tol-orders", "6", "--check-oracle",
        ]);
        assert_eq!(out.status.code(), Some(0), "{method}: {}", String::from_utf8_lossy(&out.stderr));
        let v = json(&out);
        assert_eq!(v["report"]["method"], method);
        assert!(v["oracle_max_error"].as_f64().unwrap() <= 1e-4);
    }
}

#[test]
fn missing_model_is_a_usage_error() {
    let out = ttmc(&["solve", "--d", "2", "--cap", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    let out = ttmc(&["solve", "--model", "nosuchmodel", "--d", "2", "--cap", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = ttmc(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_cleanly() {
    let out = ttmc(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("solve"));
}

#[test]
fn saved_solution_matches_reported_checksum() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("x.ttf1");
    let report = dir.path().join("report.json");
    let out = ttmc(&[
        "solve", "--model", "kanbanalt2", "--d", "3", "--cap", "2", "--method", "amen", "--tol-orders", "8",
        "--out", report.to_str().unwrap(), "--save-solution", sol.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let x = io::load(&sol).unwrap();
    assert_eq!(x.modes(), vec![3, 3, 3]);
    assert!((x.sum() - 1.0).abs() < 1e-10);
    let bytes = io::to_bytes(&x);
    assert_eq!(bytes, fs::read(&sol).unwrap());
    let digest = hex::encode(Sha256::digest(&bytes));
    assert_eq!(v["solution_sha256"].as_str().unwrap(), digest);

    let again = dir.path().join("again.json");
    ttmc(&[
        "solve", "--model", "kanbanalt2", "--d", "3", "--cap", "2", "--method", "amen", "--tol-orders", "8",
        "--out", again.to_str().unwrap(),
    ]);
    let w: Value = serde_json::from_str(&fs::read_to_string(&again).unwrap()).unwrap();
    assert_eq!(w["solution_sha256"], v["solution_sha256"], "seeded runs are reproducible");
}

#[test]
fn validate_passes_healthy_model() {
    let out = ttmc(&["validate", "--model", "directedmetab", "--d", "3", "--cap", "3", "--tol-orders", "6"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["roundtrip_identical"], true);
}

#[test]
fn validate_flags_reducible_generator() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("model.json");
    fs::write(&spec, r#"{"kind": "kanbanalt2", "d": 3, "cap": 1, "inflow": 0.0}"#).unwrap();
    let out = ttmc(&["validate", "--spec-file", spec.to_str().unwrap(), "--method", "amen"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["passed"], false);
    assert_eq!(v["generator"]["strongly_connected"], false);
}

#[test]
fn bench_writes_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("table.csv");
    let out = ttmc(&[
        "bench", "--model", "overflow", "--d", "2,3", "--cap", "4", "--methods", "amen,multigrid",
        "--out", csv_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(header, ["model", "d", "cap", "method", "time", "iter", "rank", "status"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    for row in &rows {
        assert_eq!(&row[0], "overflow");
        assert_eq!(&row[7], "converged");
        assert!(row[5].parse::<usize>().unwrap() >= 1);
    }
}

#[test]
fn bench_marks_unconverged_runs() {
    let out = ttmc(&[
        "bench", "--model", "overflow", "--d", "3", "--cap", "8", "--methods", "multigrid", "--max-iter", "1",
        "--tol-orders", "12",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stdout);
    let row = text.lines().nth(1).unwrap();
    assert!(row.contains("---"), "{row}");
}
