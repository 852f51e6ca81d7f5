use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn levylab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levylab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path
}

const OSCILLATOR: &str = r#"
[model]
family = "harmonic"
omega = 1.0
mode = "analytic"

[grid]
half_width = 8.0
points = 801

[spectrum]
states = 20
"#;

const SMALL_ALPHA: &str = r#"
[model]
family = "alpha"
alpha = 2.5

[grid]
half_width = 10.0
points = 801

[spectrum]
states = 24

[sampler]
enabled = true
n_paths = 400
dt = 0.01
times = [0.5]
lags = [0.5]
"#;

fn run_in(dir: &Path, cmd: &str, config: &Path, extra: &[&str]) -> Output {
    let out = dir.join("out");
    let mut args = vec![cmd, "--quiet", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    levylab(&args)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn even_grid_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &OSCILLATOR.replace("801", "800"));
    let out = run_in(tmp.path(), "pipeline", &cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("odd"));
}

#[test]
fn unknown_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{OSCILLATOR}\n[chi2]\ntimez = [1.0]\n"));
    let out = run_in(tmp.path(), "pipeline", &cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("timez"));
}

#[test]
fn oscillator_has_no_connected_four_point() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), OSCILLATOR);
    let out = run_in(tmp.path(), "chi2", &cfg, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&tmp.path().join("out/chi2_report.json"));
    assert!(report["chi2_small"].as_f64().unwrap().abs() < 1e-12);
    assert!(report["chi2_large"].as_f64().unwrap().abs() < 1e-12);
    let manifest = json(&tmp.path().join("out/run.json"));
    assert_eq!(manifest["status"], "ok");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_ALPHA);
    let mut reports = Vec::new();
    for _ in 0..2 {
        let out = run_in(tmp.path(), "pipeline", &cfg, &[]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let dir = tmp.path().join("out");
        reports.push((
            fs::read(dir.join("chi2_report.json")).unwrap(),
            fs::read(dir.join("sampler.json")).unwrap(),
            fs::read(dir.join("spectrum.csv")).unwrap(),
        ));
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn seed_flag_changes_only_the_sampler() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_ALPHA);
    let read = |seed: &str| {
        let out = run_in(tmp.path(), "sample", &cfg, &["--seed", seed]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        json(&tmp.path().join("out/sampler.json"))
    };
    let a = read("3");
    let b = read("4");
    assert_eq!(a["seed"], 3);
    assert_eq!(b["seed"], 4);
    assert_ne!(a["chi2"], b["chi2"]);
}

#[test]
fn manifest_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_ALPHA);
    assert!(run_in(tmp.path(), "chi2", &cfg, &[]).status.success());
    let first = fs::read(tmp.path().join("out/chi2_report.json")).unwrap();
    let manifest = tmp.path().join("manifest.json");
    fs::copy(tmp.path().join("out/run.json"), &manifest).unwrap();
    fs::remove_dir_all(tmp.path().join("out")).unwrap();
    let out = run_in(tmp.path(), "chi2", &manifest, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(tmp.path().join("out/chi2_report.json")).unwrap(), first);
}

#[test]
fn stage_selection_limits_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_ALPHA);
    let out = run_in(tmp.path(), "pipeline", &cfg, &["--stages", "density"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("out");
    assert!(dir.join("density.csv").exists());
    assert!(dir.join("run.json").exists());
    for absent in ["potential.csv", "spectrum.csv", "chi2_report.json", "sampler.json"] {
        assert!(!dir.join(absent).exists(), "{absent} written");
    }
}

#[test]
fn failed_stage_leaves_marker_and_earlier_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SMALL_ALPHA.replace("dt = 0.01", "dt = 0.5"));
    let out = run_in(tmp.path(), "pipeline", &cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    let dir = tmp.path().join("out");
    assert!(dir.join("FAILED").exists());
    assert!(dir.join("chi2_report.json").exists());
    let manifest = json(&dir.join("run.json"));
    assert_eq!(manifest["failed_stage"], "sample");

    // A clean rerun clears the marker.
    let cfg = write_config(tmp.path(), SMALL_ALPHA);
    assert!(run_in(tmp.path(), "pipeline", &cfg, &[]).status.success());
    assert!(!dir.join("FAILED").exists());
}

#[test]
fn validate_detects_parity_defect() {
    assert_eq!(levylab(&["validate", "--no-sampler"]).status.code(), Some(0));
    let out = levylab(&["validate", "--no-sampler", "--perturb-q"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}
