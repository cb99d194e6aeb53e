use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn porousflow(args: &[&str], out_root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_porousflow"))
        .args(args)
        .env("POROUSFLOW_OUT", out_root)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn error_report(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("stderr: {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn sweep_writes_hashed_artifacts_under_the_env_root() {
    let root = tempfile::tempdir().unwrap();
    let out = porousflow(&["pfem", "sweep", "--set", "pe_points=20"], root.path());
    assert!(out.status.success());
    let dir = root.path().join("pfem-sweep");
    let manifest = read_json(&dir.join("manifest.json"));
    let names: Vec<&str> =
        manifest["artifacts"].as_array().unwrap().iter().map(|a| a["path"].as_str().unwrap()).collect();
    assert_eq!(names, ["min_degree.csv", "sweep.csv", "thresholds.csv"]);
    let sweep = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert!(sweep.starts_with("Pe,p,"));
    assert_eq!(sweep.lines().count(), 1 + 20 * 8);
    assert_eq!(manifest["config"]["experiment"]["params"]["pe_points"], 20);
}

#[test]
fn manifests_do_not_depend_on_threads_or_location() {
    let root = tempfile::tempdir().unwrap();
    let a = root.path().join("a");
    let b = root.path().join("b");
    let common = ["pore", "pack", "--set", "pack.box_diameters=[4,4,4]", "--set", "realizations=2", "--seed", "7"];
    let run = |dir: &Path, threads: &str| {
        let mut args = common.to_vec();
        args.extend(["--threads", threads, "--out", dir.to_str().unwrap()]);
        assert!(porousflow(&args, root.path()).status.success());
        std::fs::read(dir.join("manifest.json")).unwrap()
    };
    assert_eq!(run(&a, "1"), run(&b, "2"));
    assert_eq!(read_json(&a.join("manifest.json"))["seed"], 7);
}

#[test]
fn malformed_config_fails_without_artifacts() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("bad.json");
    std::fs::write(&cfg, r#"{"experiment":{"kind":"pfem-sweep","params":{"pe_point":3}}}"#).unwrap();
    let out = porousflow(&["run", cfg.to_str().unwrap()], root.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_report(&out)["error"]["kind"], "config");
    assert!(!root.path().join("pfem-sweep").exists());
}

#[test]
fn config_kind_must_match_the_subcommand() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("sweep.json");
    std::fs::write(&cfg, r#"{"experiment":{"kind":"pfem-sweep","params":{}}}"#).unwrap();
    let out = porousflow(&["pore", "solve", "--config", cfg.to_str().unwrap()], root.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_three() {
    let root = tempfile::tempdir().unwrap();
    let out =
        porousflow(&["pore", "solve", "--set", "cells_per_diameter=8", "--set", "stokes.max_iter=3"], root.path());
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_report(&out)["error"]["kind"], "numerical");
    assert!(!root.path().join("pore-solve").exists());
}

#[test]
fn unknown_figure_lists_the_choices() {
    let root = tempfile::tempdir().unwrap();
    let out = porousflow(&["repro", "fig1"], root.path());
    assert_eq!(out.status.code(), Some(2));
    let msg = error_report(&out)["error"]["message"].as_str().unwrap().to_string();
    assert!(msg.contains("fig10") && msg.contains("tab1-analog"));
}

#[test]
fn repro_fig10_is_near_linear() {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path().join("fig10");
    let out = porousflow(&["repro", "fig10", "--out", dir.to_str().unwrap()], root.path());
    assert!(out.status.success());
    let table = std::fs::read_to_string(dir.join("thresholds.csv")).unwrap();
    let pes: Vec<f64> = table.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    let steps: Vec<f64> = pes.windows(2).map(|w| w[1] - w[0]).collect();
    for s in &steps {
        assert!((s - steps[0]).abs() < 0.05 * steps[0], "{steps:?}");
    }
}

#[test]
fn print_config_shows_resolved_values() {
    let root = tempfile::tempdir().unwrap();
    let out = porousflow(&["ident", "run", "--seed", "5", "--set", "nx=16", "--print-config"], root.path());
    assert!(out.status.success());
    let cfg: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cfg["seed"], 5);
    assert_eq!(cfg["experiment"]["params"]["nx"], 16);
    assert!(!root.path().join("ident").exists());
}

#[test]
fn small_identification_run() {
    let root = tempfile::tempdir().unwrap();
    let out =
        porousflow(&["ident", "run", "--set", "nx=16", "--set", "ny=16", "--set", "partition=[2,2]"], root.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = root.path().join("ident");
    let report = read_json(&dir.join("report.json"));
    assert!(report["relative_errors"][0].as_f64().unwrap() < 1e-3);
    let history = std::fs::read_to_string(dir.join("history.csv")).unwrap();
    assert!(history.lines().count() > 1);
    assert_eq!(std::fs::read_to_string(dir.join("parameters.csv")).unwrap().lines().count(), 5);
}
