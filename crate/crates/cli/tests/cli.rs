use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn eigenpde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eigenpde"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_into(dir: &Path, scenario: &str) -> Output {
    eigenpde(&["--scenario", scenario, "--out", dir.to_str().unwrap(), "--threads", "1"])
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn trivial_scenario_succeeds_and_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_into(tmp.path(), "trivial-logdet");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(tmp.path());
    assert_eq!(r["status"], "ok");
    assert_eq!(r["result"]["sup_u"], 0.0);
    let csv = fs::read_to_string(tmp.path().join("u.csv")).unwrap();
    assert!(csv.lines().count() > 17 * 17);
}

#[test]
fn failed_subsolution_exits_with_precondition_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_into(tmp.path(), "subsolution-fail");
    assert_eq!(out.status.code(), Some(3));
    let r = report(tmp.path());
    assert_eq!(r["status"], "failed");
    assert_eq!(r["error"]["category"], "precondition");
}

#[test]
fn malformed_scenario_exits_with_parse_code() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("bad.json");
    fs::write(&file, r#"{ "name": "x", "task": { "kind": "complex-solve", "colour": 1 } }"#).unwrap();
    let out = run_into(&tmp.path().join("out"), file.to_str().unwrap());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(eigenpde(&[]).status.code(), Some(2));
    assert_eq!(eigenpde(&["--scenario", "trivial-logdet", "--threads", "0"]).status.code(), Some(2));
}

#[test]
fn missing_scenario_exits_with_io_code() {
    let out = eigenpde(&["--scenario", "/nonexistent/scenario.json"]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn custom_file_round_trips_through_show() {
    let tmp = tempfile::tempdir().unwrap();
    let shown = eigenpde(&["show", "strict-hu-n1"]);
    assert!(shown.status.success());
    let file = tmp.path().join("strict.json");
    fs::write(&file, &shown.stdout).unwrap();
    let out = run_into(&tmp.path().join("out"), file.to_str().unwrap());
    assert_eq!(out.status.code(), Some(0));
    let bound = &report(&tmp.path().join("out"))["result"]["bound_diagnostics"][0];
    assert_eq!(bound["name"], "c0-strict-hu");
    assert_eq!(bound["satisfied"], true);
}

#[test]
fn listings() {
    let ops = eigenpde(&["list-operators"]);
    let text = String::from_utf8(ops.stdout).unwrap();
    for id in ["log-det", "sigma-k", "sigma-quotient", "nm1-ma"] {
        assert!(text.contains(id), "{id} missing from\n{text}");
    }
    let scenarios = String::from_utf8(eigenpde(&["list-scenarios"]).stdout).unwrap();
    assert!(scenarios.lines().any(|l| l.starts_with("hesse-einstein")));
}

#[test]
fn reports_are_byte_identical_across_runs_and_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run_into(&a, "strict-hu-n2").status.success());
    let out = eigenpde(&["--scenario", "strict-hu-n2", "--out", b.to_str().unwrap(), "--threads", "4"]);
    assert!(out.status.success());
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap());
}
