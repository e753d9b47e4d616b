use std::path::Path;
use std::process::{Command, Output};

fn infobid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infobid")).args(args).output().unwrap()
}

fn run_with(cmd: &str, config: &str, out: &Path) -> Output {
    let cfg = out.join("config.json");
    std::fs::create_dir_all(out).unwrap();
    std::fs::write(&cfg, config).unwrap();
    infobid(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.join("run").to_str().unwrap()])
}

#[test]
fn toy_run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with("toy", r#"{"steps": 300, "trajectories": 4}"#, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["toy_noise_floor.csv", "toy_landscape.json", "summary.json"] {
        assert!(dir.path().join("run").join(f).is_file(), "{f}");
    }
    let printed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let written: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/summary.json")).unwrap()).unwrap();
    assert_eq!(printed, written);
}

#[test]
fn bounds_run_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with("bounds", r#"{"instances": 5, "runs": 2, "auctions": 500}"#, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("run/bounds_fisher.csv").is_file());
    assert!(dir.path().join("run/bounds_telescope.csv").is_file());
}

#[test]
fn exp2_run_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"trials": 2, "t": 400, "eta_grid": [0.01, 1.0], "budget_grid": [50.0]}"#;
    let out = run_with("exp2", cfg, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("run/exp2_mae_vs_eta.csv").is_file());
}

#[test]
fn malformed_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with("exp1", r#"{"seeds": "zero"}"#, dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn invalid_parameters_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with("exp3", r#"{"seeds": []}"#, dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_config_exits_with_one() {
    let out = infobid(&["bounds", "--config", "/nonexistent/infobid.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/infobid.json"));
}

#[test]
fn unknown_subcommand_is_rejected() {
    let out = infobid(&["exp9"]);
    assert!(!out.status.success());
}
