//! End-to-end runs of the `nanodimer` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nanodimer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nanodimer"))
        .args(args)
        .env("NANODIMER_LANES", "2")
        .output()
        .expect("binary runs")
}

fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(str::to_string)
        .collect()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn trajectory_smoke_run_writes_one_row_per_stride() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("traj");
    let o = nanodimer(&[
        "trajectory",
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "17",
        "--set",
        "steps=1000",
        "--set",
        "record_stride=20",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_rows(&out.join("trajectory.csv")).len(), 50);
    let m = manifest(&out);
    assert_eq!(m["seed"], 17);
    assert_eq!(m["command"], "trajectory");
    assert_eq!(m["lanes"], 2);
    assert_eq!(m["params_hash"].as_str().unwrap().len(), 16);
}

#[test]
fn identical_runs_give_identical_csv_and_echo_reproduces() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    let args = |dir: &Path| {
        vec![
            "stationary".to_string(),
            "--out".into(),
            dir.to_str().unwrap().into(),
            "--seed".into(),
            "3".into(),
            "--set".into(),
            "pumps=5.99,6.03".into(),
            "--set".into(),
            "n_traj=2".into(),
            "--set".into(),
            "transient=0.5".into(),
            "--set".into(),
            "window=1".into(),
            "--set".into(),
            "sample_stride=20".into(),
            "--set".into(),
            "relax=0".into(),
        ]
    };
    let run = |v: Vec<String>| {
        let refs: Vec<&str> = v.iter().map(String::as_str).collect();
        let o = nanodimer(&refs);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    run(args(&a));
    let mut lanes1 = args(&b);
    lanes1.extend(["--lanes".into(), "1".into()]);
    run(lanes1);
    let csv_a = fs::read(a.join("stationary.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("stationary.csv")).unwrap());
    assert_eq!(manifest(&b)["lanes"], 1);

    let echo = a.join("config.txt");
    run(vec![
        "stationary".into(),
        "--params".into(),
        echo.to_str().unwrap().into(),
        "--out".into(),
        c.to_str().unwrap().into(),
    ]);
    assert_eq!(csv_a, fs::read(c.join("stationary.csv")).unwrap());
    assert_eq!(manifest(&c)["seed"], 3);
    assert_eq!(data_rows(&a.join("stationary.csv")).len(), 2);
}

#[test]
fn beta_sweep_with_two_betas_gives_two_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("beta");
    let o = nanodimer(&[
        "beta-sweep",
        "--out",
        out.to_str().unwrap(),
        "--set",
        "betas=0.017,0.0017",
        "--set",
        "pumps=6.0,6.02,6.04",
        "--set",
        "n_traj=1",
        "--set",
        "transient=0.2",
        "--set",
        "window=0.5",
        "--set",
        "sample_stride=20",
        "--set",
        "relax=0",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_rows(&out.join("beta_sweep.csv")).len(), 2);
    let files = manifest(&out)["artifacts"].as_array().unwrap().len();
    assert_eq!(files, 4);
}

#[test]
fn bifurcation_table_lists_the_nine_pumps() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bif");
    let o = nanodimer(&["bifurcation", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_rows(&out.join("bifurcation.csv"));
    let pumps: Vec<f64> = rows.iter().map(|r| r.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(pumps, vec![6.008, 6.010, 6.012, 6.016, 6.020, 6.024, 6.028, 6.032, 6.036]);
    let codes: Vec<&str> = rows.iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    assert_eq!(codes, vec!["1", "2", "2", "2", "2", "2", "2", "2", "3"]);
}

#[test]
fn config_errors_are_reported_with_nonzero_exit() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("bad.txt");
    fs::write(&file, "schema = 1\nkapa = 140\n").unwrap();
    let o = nanodimer(&["trajectory", "--params", file.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(report["error"], "config");
    let msg = report["message"].as_str().unwrap();
    assert!(msg.contains("line 2") && msg.contains("kappa"), "{msg}");

    let o = nanodimer(&["ramp", "--set", "duration=-1", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!nanodimer(&["nonsense"]).status.success());
}
