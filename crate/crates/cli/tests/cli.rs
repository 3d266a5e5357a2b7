//! End-to-end runs of the `slowcone` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slowcone"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/paper-4d.toml")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn circle_simulation_returns_to_its_start() {
    let o = run(&["simulate", "--builtin", "circle", "--ic", "1,0", "--t", "6.283185307179586", "--dense", "9"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x,y"));
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((last[1] - 1.0).abs() < 1e-8 && last[2].abs() < 1e-8, "{last:?}");
    assert_eq!(text.lines().count(), 10);
}

#[test]
fn simulation_writes_trajectory_and_summary() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sim");
    let o = run(&[
        "simulate", "--builtin", "paper-4d", "--ic", "2,2,3,12", "--t", "5", "--dense", "50", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_header(&out.join("trajectory.csv")), "t,x,y,z,w");
    assert_eq!(json(&out.join("simulate.json"))["schema_version"], 1);
}

#[test]
fn missing_initial_condition_is_a_usage_error() {
    assert_eq!(code(&run(&["simulate", "--builtin", "circle"])), 1);
    assert_eq!(code(&run(&["classify", "--builtin", "circle", "--config", "x.toml", "--ic", "1,0"])), 1);
    assert_eq!(code(&run(&["no-such-command"])), 1);
}

#[test]
fn help_exits_cleanly() {
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn wrong_dimension_initial_condition_is_an_error() {
    let o = run(&["simulate", "--builtin", "circle", "--ic", "1,0,0"]);
    assert_eq!(code(&o), 1);
    assert!(!o.stderr.is_empty());
}

#[test]
fn zero_or_large_eps_is_rejected() {
    for eps in ["0", "-0.01", "0.2"] {
        let o = run(&["classify", "--builtin", "paper-4d", "--eps", eps, "--ic", "2,2,3,12"]);
        assert_eq!(code(&o), 1, "eps {eps}");
    }
    let dir = TempDir::new().unwrap();
    let o = run(&["demo-paper", "--eps", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn eps_on_a_system_without_fast_variables_is_rejected() {
    assert_eq!(code(&run(&["simulate", "--builtin", "circle", "--eps", "0.05", "--ic", "1,0"])), 1);
}

#[test]
fn certify_exit_codes_follow_the_verdict() {
    let pass = run(&["certify", "--builtin", "paper-3d-limit", "--lambda", "3*(x^2+y^2+z^2)"]);
    assert_eq!(code(&pass), 0);
    let report: Value = serde_json::from_slice(&pass.stdout).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["report"]["pass"], true);
    let fail = run(&["certify", "--builtin", "paper-3d-limit", "--lambda", "0"]);
    assert_eq!(code(&fail), 2);
    let report: Value = serde_json::from_slice(&fail.stdout).unwrap();
    assert!(report["report"]["algebraic"]["worst_witnesses"].as_array().unwrap().len() <= 10);
    assert_eq!(code(&run(&["certify", "--builtin", "paper-3d-limit", "--lambda", "3*q"])), 1);
}

#[test]
fn dynamic_certificate_of_the_slow_fast_system() {
    let o = run(&[
        "certify", "--builtin", "paper-4d", "--mode", "dynamic", "--n", "5", "--directions", "8",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn classify_writes_orbit_and_honours_expectations() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("c");
    let o = run(&[
        "classify", "--builtin", "paper-3d-limit", "--ic", "2,2,3", "--expect", "closed-orbit", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&out.join("classify.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["report"]["classification"]["kind"], "ClosedOrbit");
    assert_eq!(csv_header(&out.join("orbit.csv")), "t,x,y,z");
    let eq = run(&["classify", "--builtin", "paper-3d-limit", "--ic", "0,0,1", "--expect", "closed-orbit"]);
    assert_eq!(code(&eq), 2);
    let report: Value = serde_json::from_slice(&eq.stdout).unwrap();
    assert_eq!(report["report"]["classification"]["kind"], "Equilibrium");
}

#[test]
fn manifold_table_has_both_orders() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("m");
    let o = run(&["manifold", "--builtin", "paper-4d", "--grid", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        csv_header(&out.join("manifold.csv")),
        "x,y,z,h0_w,h1_w,defect0,defect1,spectral_abscissa"
    );
    assert_eq!(fs::read_to_string(out.join("manifold.csv")).unwrap().lines().count(), 28);
    assert_eq!(json(&out.join("manifold.json"))["schema_version"], 1);
}

#[test]
fn sweep_reports_are_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = config();
    let mut reports = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("s{k}"));
        let o = run(&[
            "sweep", "--config", cfg.to_str().unwrap(), "--n", "6", "--seed", "7", "--min-closed", "0.5", "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(csv_header(&out.join("sweep.csv")), "index,x,y,z,w,outcome,period");
        reports.push((fs::read(out.join("sweep.json")).unwrap(), fs::read(out.join("sweep.csv")).unwrap()));
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn unattainable_closed_orbit_fraction_fails_the_sweep() {
    let o = run(&["sweep", "--builtin", "paper-3d-limit", "--n", "3", "--min-closed", "1.01"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn parse_check_round_trips_a_config() {
    let o = run(&["parse-check", "--config", config().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("name = \"paper-4d-config\""));
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, fs::read_to_string(config()).unwrap().replace("-w + x + y + z", "-w + (x + y")).unwrap();
    let o = run(&["parse-check", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
}

#[test]
fn demo_writes_every_artifact() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("demo");
    let o = run(&["demo-paper", "--n", "4", "--t", "20", "--dense", "200", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "equilibria.json",
        "certify.json",
        "manifold.json",
        "manifold.csv",
        "classify.json",
        "timeseries.csv",
        "limit_xyz.csv",
        "sweep.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    for (name, cols) in [("xyz", "t,x,y,z"), ("xyw", "t,x,y,w"), ("yzw", "t,y,z,w"), ("xzw", "t,x,z,w")] {
        let path = out.join(format!("projection_{name}.csv"));
        assert_eq!(csv_header(&path), cols);
        let rows = fs::read_to_string(&path).unwrap();
        let first_row = rows.lines().nth(1).unwrap();
        assert_eq!(first_row.split(',').count(), 4);
    }
    assert_eq!(json(&out.join("classify.json"))["report"]["classification"]["kind"], "ClosedOrbit");
    assert_eq!(csv_header(&out.join("timeseries.csv")), "t,x,y,z,w");
}
