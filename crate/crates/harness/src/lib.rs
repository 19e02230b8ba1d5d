//! Experiment orchestration around the `manifold-extremes` core: config
//! parsing, seeded runs, and deterministic artifact emission.

pub mod config;
pub mod experiments;
pub mod report;
pub mod svg;

use std::path::Path;

use config::{ExperimentConfig, ExperimentKind};
use experiments::RunOutcome;
use report::OutputDir;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] manifold_extremes::Error),
}

/// Loads, validates and runs one experiment, writing artifacts under `out`.
pub fn run_experiment(
    kind: ExperimentKind,
    config_path: &Path,
    seed_override: Option<u64>,
    out: &Path,
) -> Result<RunOutcome, HarnessError> {
    let (mut cfg, raw) = ExperimentConfig::from_path(config_path)?;
    cfg.validate(kind)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    let out = OutputDir::create(out)?;
    match kind {
        ExperimentKind::LimitLaw => experiments::limit_law::run(&cfg, &raw, &out),
        ExperimentKind::Tail => experiments::tail::run(&cfg, &raw, &out),
        ExperimentKind::Pickands => experiments::pickands::run(&cfg, &raw, &out),
        ExperimentKind::Assumptions => experiments::assumptions::run(&cfg, &raw, &out),
    }
}
