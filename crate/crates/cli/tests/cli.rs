use std::process::{Command, Output};

fn dynlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynlab")).args(args).output().unwrap()
}

#[test]
fn check_ld_prints_its_report() {
    let out = dynlab(&["check-ld", "--c", "-2", "--k", "4"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["check"], "ld");
    assert_eq!(report["summary"]["verdict"], "no-violation-within-budget");
}

#[test]
fn out_directory_receives_the_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dynlab(&["--out", dir.path().to_str().unwrap(), "interval", "orbit", "--family", "logistic", "--a", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["experiment-orbit.json", "experiment-summary.csv"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
}

#[test]
fn config_file_drives_a_run_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "name = \"cheb\"\nc_re = -2.0\nchecks = [\"ld\"]\nld_k = 1e9\n").unwrap();
    let base = dynlab(&["--config", path.to_str().unwrap()]);
    assert!(base.status.success());
    let report: serde_json::Value = serde_json::from_slice(&base.stdout).unwrap();
    assert_eq!(report["name"], "cheb");

    let overridden = dynlab(&["--config", path.to_str().unwrap(), "check-ld", "--k", "4"]);
    let report: serde_json::Value = serde_json::from_slice(&overridden.stdout).unwrap();
    assert_eq!(report["config"]["ld_k"].as_f64(), Some(4.0));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "no_such_key = 1\n").unwrap();
    assert_eq!(dynlab(&["--config", path.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(dynlab(&["check-bc", "--r", "-1"]).status.code(), Some(2));
}

#[test]
fn engine_errors_exit_with_one() {
    let out = dynlab(&["interval", "check-ld", "--family", "logistic", "--a", "4.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("failed"));
}

#[test]
fn scan_prints_one_csv_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scan.toml");
    std::fs::write(&path, "family = \"logistic\"\nchecks = [\"ld\"]\nld_k = 4.0\n").unwrap();
    let out = dynlab(&["scan", "--config", path.to_str().unwrap(), "--parameter", "a", "--values", "3.9,4.0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);
}
