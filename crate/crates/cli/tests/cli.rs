use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn exasym(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_exasym"));
    cmd.args(args).env_remove("EXASYM_PRECISION");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn list_shows_the_catalog() {
    let out = exasym(&["list"], &[]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    for (line, name) in lines.iter().zip(["toy", "airy", "painleve1", "resonant"]) {
        assert!(line.starts_with(name), "{line}");
    }
    assert!(lines[2].contains("no oracle: series-only experiments"));
    assert!(lines[3].contains("m (real, required)"));
}

#[test]
fn stokes_run_writes_reproducible_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();
    let args = ["stokes", "--equation", "toy", "--set", "r_window=[150,200]", "--set", "tolerance=1e-8", "--set", "relative=false", "--out", o];
    let first = exasym(&args, &[]);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let csv1 = fs::read(out.join("toy_stokes.csv")).unwrap();
    let report = json(&out.join("toy_stokes.json"));
    assert_eq!(report["schema"], 1);
    assert_eq!(report["status"], "ok");
    assert_eq!(report["pass"], true);
    assert_eq!(report["precision"]["bits"], 256);
    assert!(report["metadata"]["wall_time_s"].is_number());
    assert!(report["checks"][0]["upper"].is_number());

    let second = exasym(&args, &[]);
    assert!(second.status.success());
    assert_eq!(csv1, fs::read(out.join("toy_stokes.csv")).unwrap());
}

#[test]
fn schema_errors_exit_2_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();
    let missing_r = exasym(&["berry", "--equation", "toy", "--out", o], &[]);
    assert_eq!(missing_r.status.code(), Some(2));
    let unknown = exasym(&["coeffs", "--equation", "nope", "--set", "k_max=3", "--out", o], &[]);
    assert_eq!(unknown.status.code(), Some(2));
    let bad_key = exasym(&["coeffs", "--equation", "toy", "--set", "k_max=3", "--set", "kmax=4", "--out", o], &[]);
    assert_eq!(bad_key.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn numerical_errors_exit_3_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    let out = exasym(
        &["stokes", "--equation", "resonant", "--param", "m=1", "--set", "r_window=[150,200]", "--out", o],
        &[],
    );
    assert_eq!(out.status.code(), Some(3));
    let report = json(&dir.path().join("resonant_stokes.json"));
    assert_eq!(report["status"], "error");
    assert_eq!(report["error"]["kind"], "oscillation_detected");
    assert!(!dir.path().join("resonant_stokes.csv").exists());
}

#[test]
fn environment_precision_only_fills_a_gap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    let o = dir.path().to_str().unwrap();
    fs::write(&cfg, r#"{"id": "a", "equation": "toy", "experiment": "coeffs", "k_max": 5}"#).unwrap();
    let env = [("EXASYM_PRECISION", "128")];
    assert!(exasym(&["run", "--config", cfg.to_str().unwrap(), "--out", o], &env).status.success());
    assert_eq!(json(&dir.path().join("a.json"))["precision"]["bits"], 128);

    fs::write(&cfg, r#"{"id": "b", "equation": "toy", "experiment": "coeffs", "k_max": 5, "precision": 192}"#).unwrap();
    assert!(exasym(&["run", "--config", cfg.to_str().unwrap(), "--out", o], &env).status.success());
    assert_eq!(json(&dir.path().join("b.json"))["precision"]["bits"], 192);

    // command-line flags win over the config
    let args = ["run", "--config", cfg.to_str().unwrap(), "--out", o, "--precision", "320", "--set", "k_max=7"];
    assert!(exasym(&args, &env).status.success());
    let report = json(&dir.path().join("b.json"));
    assert_eq!(report["precision"]["bits"], 320);
    assert_eq!(report["config"]["k_max"], 7);
}

#[test]
fn suites_run_every_entry_and_filter_by_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("suite.json");
    let o = dir.path().to_str().unwrap();
    fs::write(
        &cfg,
        r#"{"runs": [
            {"id": "c", "equation": "toy", "experiment": "coeffs", "k_max": 5},
            {"id": "s", "equation": "toy", "experiment": "stokes", "r_window": [40, 60]}
        ]}"#,
    )
    .unwrap();
    assert!(exasym(&["stokes", "--config", cfg.to_str().unwrap(), "--out", o], &[]).status.success());
    assert!(dir.path().join("s.json").exists());
    assert!(!dir.path().join("c.json").exists());
    assert!(exasym(&["run", "--config", cfg.to_str().unwrap(), "--out", o], &[]).status.success());
    assert!(dir.path().join("c.csv").exists());
}
