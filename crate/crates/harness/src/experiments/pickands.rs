//! Pickands-constant ladder runs with plateau extrapolation.

use serde::Serialize;

use manifold_extremes::pickands::{estimate_h, extrapolate_h, PickandsEstimate};

use crate::config::ExperimentConfig;
use crate::experiments::RunOutcome;
use crate::report::{derive_seed, fmt, OutputDir};
use crate::svg::{render_chart, Series};
use crate::HarnessError;

#[derive(Serialize)]
struct RungRow {
    l: usize,
    gamma: f64,
    extent: f64,
    h_l_gamma: f64,
    h_rate: f64,
    corrected_rate: f64,
    stderr: f64,
    max_summand: f64,
}

#[derive(Serialize)]
struct Report {
    kind: &'static str,
    alpha: f64,
    r: usize,
    reps: usize,
    ladder: Vec<RungRow>,
    h_hat: f64,
    uncertainty: f64,
    converged: bool,
}

pub fn run(cfg: &ExperimentConfig, raw: &[u8], out: &OutputDir) -> Result<RunOutcome, HarnessError> {
    let alpha = cfg.alpha.unwrap();
    let r = cfg.r.unwrap();
    let ladder = cfg.ladder.as_ref().unwrap();

    let mut seeds = Vec::new();
    let estimates: Vec<PickandsEstimate> = ladder
        .iter()
        .enumerate()
        .map(|(i, rung)| {
            let seed = derive_seed(cfg.seed, i as u64);
            seeds.push((format!("rung_{i}"), seed));
            estimate_h(alpha, r, rung.l, rung.gamma, cfg.reps, seed)
        })
        .collect::<Result<_, _>>()?;
    let extrap = extrapolate_h(&estimates)?;

    let rows: Vec<RungRow> = estimates
        .iter()
        .map(|e| RungRow {
            l: e.config.l,
            gamma: e.config.gamma,
            extent: e.config.extent(),
            h_l_gamma: e.h_l_gamma,
            h_rate: e.h_rate,
            corrected_rate: e.corrected_rate,
            stderr: e.stderr,
            max_summand: e.max_summand,
        })
        .collect();
    let report = Report {
        kind: "pickands",
        alpha,
        r,
        reps: cfg.reps,
        ladder: rows,
        h_hat: extrap.h_hat,
        uncertainty: extrap.uncertainty,
        converged: extrap.converged,
    };
    out.write_report(&report)?;

    let csv_rows: Vec<Vec<String>> = report
        .ladder
        .iter()
        .map(|r| {
            vec![
                r.l.to_string(),
                fmt(r.gamma),
                fmt(r.extent),
                fmt(r.h_l_gamma),
                fmt(r.h_rate),
                fmt(r.corrected_rate),
                fmt(r.stderr),
                fmt(r.max_summand),
            ]
        })
        .collect();
    out.write_csv(
        "pickands",
        &["l", "gamma", "extent", "h_l_gamma", "h_rate", "corrected_rate", "stderr", "max_summand"],
        &csv_rows,
    )?;

    let xs = || report.ladder.iter().enumerate();
    let series = vec![
        Series {
            label: "corrected rate".into(),
            points: xs().map(|(i, r)| (i as f64, r.corrected_rate)).collect(),
            line: true,
            error: Some(report.ladder.iter().map(|r| r.stderr).collect()),
        },
        Series {
            label: "raw rate".into(),
            points: xs().map(|(i, r)| (i as f64, r.h_rate)).collect(),
            line: true,
            error: None,
        },
    ];
    out.write_svg(
        "pickands",
        &render_chart("ladder convergence", "rung", "H estimate", &series),
    )?;
    out.write_manifest("pickands", cfg.seed, raw, &seeds)?;

    let mut outcome = RunOutcome::default();
    if !extrap.converged {
        outcome.violations.push("pickands ladder flagged non-convergent".into());
    }
    Ok(outcome)
}
