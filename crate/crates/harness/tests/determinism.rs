//! Artifact determinism and CLI exit-status contracts.

use std::fs;
use std::path::Path;
use std::process::Command;

use extremes_harness::config::ExperimentKind;
use extremes_harness::run_experiment;

const SMALL_LIMIT_LAW: &str = r#"
kind = "limit_law"
seed = 11
reps = 200
h_list = [0.25, 0.2]
z_grid = [-0.5, 0.0, 1.0]
[manifold]
kind = "circle"
radius = 1.0
[model]
family = "powered_exponential"
alpha = 2.0
d = [[1.0, 0.0], [0.0, 1.0]]
"#;

fn run_into(dir: &Path, toml_text: &str) {
    let cfg = dir.join("config.toml");
    fs::write(&cfg, toml_text).unwrap();
    let out = dir.join("out");
    run_experiment(ExperimentKind::LimitLaw, &cfg, None, &out).unwrap();
}

#[test]
fn repeat_runs_are_byte_identical() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    run_into(d1.path(), SMALL_LIMIT_LAW);
    run_into(d2.path(), SMALL_LIMIT_LAW);
    for rel in [
        "out/report.json",
        "out/manifest.json",
        "out/tables/limit_law.csv",
        "out/tables/limit_law_deviation.csv",
        "out/plots/limit_law.svg",
    ] {
        let a = fs::read(d1.path().join(rel)).unwrap();
        let b = fs::read(d2.path().join(rel)).unwrap();
        assert_eq!(a, b, "{rel} differs between identical runs");
    }
}

#[test]
fn seed_changes_the_tables() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    run_into(d1.path(), SMALL_LIMIT_LAW);
    run_into(d2.path(), &SMALL_LIMIT_LAW.replace("seed = 11", "seed = 12"));
    let a = fs::read(d1.path().join("out/tables/limit_law.csv")).unwrap();
    let b = fs::read(d2.path().join("out/tables/limit_law.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn cli_reports_config_errors_distinctly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "kind = \"limit_law\"\nseed = 1\nreps = 0\n").unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_extremes"))
        .args(["limit-law", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    let missing = Command::new(env!("CARGO_BIN_EXE_extremes"))
        .args(["tail", "--config", "/nonexistent.toml"])
        .status()
        .unwrap();
    assert_eq!(missing.code(), Some(2));
}

#[test]
fn cli_runs_assumptions_and_exits_clean() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("a.toml");
    fs::write(
        &cfg,
        r#"
kind = "assumptions"
seed = 7
reps = 100
[manifold]
kind = "segment"
length = 10.0
[model]
family = "moving_average"
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_extremes"))
        .args(["assumptions", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .arg("--threads")
        .arg("2")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("report.json").exists());
    assert!(out.join("manifest.json").exists());
    assert!(out.join("tables/q_of_delta.csv").exists());
    assert!(out.join("plots/q_of_delta.svg").exists());
}
