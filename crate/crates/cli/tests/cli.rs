//! End-to-end checks of the command-line interface: config validation,
//! artifact layout, exit codes and bit-level determinism.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_collisim"))
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn write_config(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("collisim-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn shipped_configs_validate_cleanly() {
    for name in ["toy.toml", "slab_convergence.toml", "lindblad.toml", "gas.toml", "young.toml"] {
        let out = bin().arg("validate").arg(repo_config(name)).output().unwrap();
        assert!(out.status.success(), "{name} failed validation: {:?}", out);
        let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(
            report["violations"].as_array().unwrap().len(),
            0,
            "{name} reported violations: {report}"
        );
    }
}

#[test]
fn unknown_field_is_a_schema_error() {
    let dir = temp_dir("schema");
    let cfg = write_config(&dir, "bad.toml", "scenario = \"toy\"\nbanana = 1\n");
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("banana"), "message should name the field: {stderr}");
}

#[test]
fn heavy_target_regime_violation_warns() {
    let dir = temp_dir("regime");
    let cfg = write_config(
        &dir,
        "regime.toml",
        r#"
scenario = "gas"

[gas]
mass_ratios = [2.0]
limit = "heavy-target"
"#,
    );
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    // warnings do not fail validation
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let v = report["violations"].as_array().unwrap();
    assert!(
        v.iter().any(|x| x["severity"] == "warning" && x["field"] == "gas.mass_ratios"),
        "expected a regime warning, got {report}"
    );
}

#[test]
fn unresolved_eta_is_an_error() {
    let dir = temp_dir("eta");
    let cfg = write_config(
        &dir,
        "eta.toml",
        r#"
scenario = "gas"

[gas]
eta = 0.001
"#,
    );
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let v = report["violations"].as_array().unwrap();
    assert!(v.iter().any(|x| x["severity"] == "error" && x["field"] == "gas.eta"));
}

#[test]
fn toy_run_produces_passing_report() {
    let dir = temp_dir("toy");
    let out = bin()
        .arg("run")
        .arg(repo_config("toy.toml"))
        .arg("--output-dir")
        .arg(&dir)
        .arg("--quiet")
        .output()
        .unwrap();
    assert!(out.status.success(), "{:?}", out);
    let run_dir = std::fs::read_dir(&dir).unwrap().next().unwrap().unwrap().path();
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["pass"], serde_json::Value::Bool(true));
    assert!(run_dir.join("config_echo.toml").exists());
}

#[test]
fn young_run_reports_unit_visibility_in_vacuum() {
    let dir = temp_dir("young");
    let cfg = write_config(
        &dir,
        "vac.toml",
        r#"
scenario = "young"

[young]
slit_separation = 1.0
screen_distance = 1000.0
wavenumber = 2.0
re_k_prime = 2.0
im_k_prime = 0.0
points_per_period = 64
window_periods = 10.0
"#,
    );
    let out =
        bin().arg("run").arg(&cfg).arg("--output-dir").arg(&dir).arg("--quiet").output().unwrap();
    assert!(out.status.success(), "{:?}", out);
    let run_dir = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .find(|p| p.is_dir())
        .unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["visibility_infinite"], serde_json::Value::Bool(true));
    let contrast = report["contrast"].as_f64().unwrap();
    assert!((contrast - 1.0).abs() < 2e-3, "vacuum contrast should be 1, got {contrast}");
    let csv = std::fs::read_to_string(run_dir.join("pattern.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("x,intensity"));
}

#[test]
fn gas_accepts_a_tabulated_potential() {
    let dir = temp_dir("table");
    let table = dir.join("vtilde.csv");
    std::fs::write(&table, "q,re,im\n-60.0,0.05,0.0\n0.0,0.05,0.0\n60.0,0.05,0.0\n").unwrap();
    let cfg = write_config(
        &dir,
        "table.toml",
        &format!(
            r#"
scenario = "gas"

[gas]
mass_ratios = [0.05]
amplitude = "first-born"
eta = 2.0

[gas.potential]
table = {{ path = "{}" }}
"#,
            table.display()
        ),
    );
    let out =
        bin().arg("run").arg(&cfg).arg("--output-dir").arg(&dir).arg("--quiet").output().unwrap();
    assert!(out.status.success(), "{:?}", out);
    let run_dir = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .find(|p| p.is_dir())
        .unwrap();
    let csv = std::fs::read_to_string(run_dir.join("refraction.csv")).unwrap();
    assert!(csv.contains("mass_ratio,re_index"));
}

#[test]
fn identical_config_and_seed_reproduce_numeric_outputs() {
    let dir_a = temp_dir("det-a");
    let dir_b = temp_dir("det-b");
    for dir in [&dir_a, &dir_b] {
        let out = bin()
            .arg("run")
            .arg(repo_config("slab_convergence.toml"))
            .arg("--output-dir")
            .arg(dir)
            .arg("--seed")
            .arg("42")
            .arg("--quiet")
            .output()
            .unwrap();
        assert!(out.status.success(), "{:?}", out);
    }
    let find = |root: &Path, name: &str| -> Vec<u8> {
        let run_dir = std::fs::read_dir(root)
            .unwrap()
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .find(|p| p.is_dir())
            .unwrap();
        std::fs::read(run_dir.join(name)).unwrap()
    };
    assert_eq!(find(&dir_a, "sweep.csv"), find(&dir_b, "sweep.csv"));
    assert_eq!(find(&dir_a, "report.json"), find(&dir_b, "report.json"));
}
