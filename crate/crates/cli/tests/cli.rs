//! End-to-end checks of the `clra` binary: exit codes, report files, and the
//! checked-in example configs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn clra() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clra"))
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn write_quick_config(dir: &Path) -> PathBuf {
    let path = dir.join("quick.toml");
    let text = std::fs::read_to_string(repo_config("snr_sweep.toml")).unwrap();
    // Same schema, but cut down for test runtime.
    let text = text
        .replace("trials = 200", "trials = 3")
        .replace("snr_db = [-10.0, 0.0, 10.0, 20.0]", "snr_db = [0.0]");
    std::fs::write(&path, text).unwrap();
    path
}

fn assert_code(output: &Output, want: i32) {
    let code = output.status.code().unwrap();
    assert_eq!(
        code,
        want,
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn validate_accepts_checked_in_configs() {
    for name in [
        "snr_sweep.toml",
        "users_sweep.toml",
        "two_phase.toml",
        "lognormal_snr_sweep.toml",
    ] {
        let out = clra()
            .args(["validate", "--config"])
            .arg(repo_config(name))
            .output()
            .unwrap();
        assert_code(&out, 0);
        assert!(String::from_utf8_lossy(&out.stdout).contains("ok:"), "{name}");
    }
}

#[test]
fn validate_rejects_unknown_keys_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let mut text = std::fs::read_to_string(repo_config("snr_sweep.toml")).unwrap();
    text.push_str("\nmystery_knob = true\n");
    std::fs::write(&path, &text).unwrap();
    let out = clra()
        .args(["validate", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_code(&out, 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("config error"));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let out = clra()
        .args(["validate", "--config", "/nonexistent/nope.toml"])
        .output()
        .unwrap();
    assert_code(&out, 1);
}

#[test]
fn run_writes_csv_and_json_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_quick_config(dir.path());

    let csv_path = dir.path().join("out.csv");
    let out = clra()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--out"])
        .arg(&csv_path)
        .args(["--format", "csv", "--threads", "2"])
        .output()
        .unwrap();
    assert_code(&out, 0);
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("axis,estimator,"));
    // 1 point x 2 estimators + header.
    assert_eq!(csv.lines().count(), 3);

    let json_path = dir.path().join("out.json");
    let out = clra()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--out"])
        .arg(&json_path)
        .args(["--format", "json"])
        .output()
        .unwrap();
    assert_code(&out, 0);
    let text = std::fs::read_to_string(&json_path).unwrap();
    assert!(text.contains("\"config_hash\""));
    assert!(text.contains("\"nmse_per_trial\""));
}

#[test]
fn run_seed_override_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_quick_config(dir.path());
    let run_with_seed = |seed: &str, name: &str| -> String {
        let path = dir.path().join(name);
        let out = clra()
            .args(["run", "--config"])
            .arg(&config)
            .args(["--out"])
            .arg(&path)
            .args(["--format", "csv", "--seed", seed])
            .output()
            .unwrap();
        assert_code(&out, 0);
        std::fs::read_to_string(&path).unwrap()
    };
    let a = run_with_seed("5", "a.csv");
    let b = run_with_seed("5", "b.csv");
    let c = run_with_seed("6", "c.csv");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn run_rejects_unknown_format() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_quick_config(dir.path());
    let out = clra()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--out", "/tmp/x", "--format", "yaml"])
        .output()
        .unwrap();
    assert_code(&out, 1);
}

#[test]
fn demo_passes() {
    let out = clra().args(["demo", "--trials", "2"]).output().unwrap();
    assert_code(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("demo: PASS"), "{stdout}");
    assert!(stdout.contains("near-near"));
}
