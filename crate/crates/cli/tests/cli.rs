use std::path::Path;
use std::process::{Command, Output};

use qkck_cli::Report;
use serde_json::Value;

fn qkck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkck")).args(args).output().expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_reports_are_deterministic_modulo_timing() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for name in ["a.json", "b.json"] {
        let path = dir.path().join(name);
        let out = qkck(&["verify", "--suite", "qalg", "--samples", "5", "--seed", "3", "--report", path.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let mut r: Report = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(r.config.report_path.as_deref(), Some(path.as_path()));
        r.config.report_path = None;
        reports.push(r.without_timing());
    }
    assert_eq!(reports[0], reports[1]);
    assert!(reports[0].pass);
    assert_eq!(reports[0].suite, "qalg");
}

#[test]
fn verify_seed_changes_measurements() {
    let dir = tempfile::tempdir().unwrap();
    let mut residuals = Vec::new();
    for seed in ["1", "2"] {
        let path = dir.path().join(format!("{seed}.json"));
        let out = qkck(&["verify", "--suite", "qalg", "--samples", "5", "--seed", seed, "--report", path.to_str().unwrap()]);
        assert!(out.status.success());
        let r: Report = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        residuals.push(r.checks.iter().map(|c| c.max_residual).collect::<Vec<_>>());
    }
    assert_ne!(residuals[0], residuals[1]);
}

#[test]
fn invalid_invocations_exit_with_2() {
    assert_eq!(qkck(&["verify", "--suite", "qalg", "--n", "1"]).status.code(), Some(2));
    assert_eq!(qkck(&["verify", "--suite", "nonsense"]).status.code(), Some(2));
    assert_eq!(qkck(&["verify", "--suite", "grassmannian", "--n", "3"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    assert_eq!(qkck(&["dump", "--what", "curvature:sphere", "--out", out.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn impossible_tolerance_exits_with_1() {
    let out = qkck(&["verify", "--suite", "qalg", "--samples", "3", "--tol-scale", "1e-30"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn dump_weylq_has_tensor_shape() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.json");
    assert!(qkck(&["dump", "--what", "weylq-gr2", "--out", path.to_str().unwrap()]).status.success());
    let v = read_json(&path);
    assert_eq!(v["header"]["kind"], "weylq");
    assert_eq!(v["header"]["shape"], serde_json::json!([8, 8, 8, 8]));
    let data = v["data"].as_array().unwrap();
    assert_eq!(data.len(), 8 * 8 * 8 * 8);
    assert!(data.iter().any(|x| x.as_f64().unwrap().abs() > 1e-3));
}

#[test]
fn dump_flat_curvature_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    assert!(qkck(&["dump", "--what", "curvature:flat", "--out", path.to_str().unwrap()]).status.success());
    let v = read_json(&path);
    assert!(v["data"].as_array().unwrap().iter().all(|x| x.as_f64() == Some(0.0)));
}

#[test]
fn dump_holonomy_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let out = qkck(&["dump", "--what", "holonomy:flat", "--loops", "2", "--out", p.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let v = read_json(&a);
    assert_eq!(v["header"]["shape"], serde_json::json!([2, 21, 21]));
}

#[test]
fn transport_end_section_is_conformal_killing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("path.json");
    let pts = serde_json::json!([[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], [0.2, 0.0, -0.1, 0.0, 0.1, 0.0, 0.0, 0.05]]);
    std::fs::write(&path, pts.to_string()).unwrap();
    let out = qkck(&["transport", "--manifold", "hpn", "--waypoints", path.to_str().unwrap(), "--check-ck"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], true);
    assert!(v["ck_residual"].as_f64().unwrap() < 1e-4);
    assert_eq!(v["psi"].as_array().unwrap().len(), 8);
}

#[test]
fn transport_rejects_bad_waypoints() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("path.json");
    std::fs::write(&path, "[[0.0, 0.0]]").unwrap();
    let out = qkck(&["transport", "--manifold", "flat", "--waypoints", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
