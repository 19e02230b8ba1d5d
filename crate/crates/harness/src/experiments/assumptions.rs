//! Assumption diagnostics for a configured (manifold, model) pair:
//! ellipticity bounds, long-range decay envelope, local-expansion defect.

use serde::Serialize;

use manifold_extremes::covariance::{assumption_report, AssumptionParams};

use crate::config::ExperimentConfig;
use crate::experiments::{check_dims, RunOutcome};
use crate::report::{fmt, OutputDir};
use crate::svg::{render_chart, Series};
use crate::HarnessError;

#[derive(Serialize)]
struct Report {
    kind: &'static str,
    manifold: String,
    model: String,
    alpha: f64,
    c_min_alpha: f64,
    c_max_alpha: f64,
    q_samples: Vec<(f64, f64)>,
    eta_margin: f64,
    v_check: bool,
    expansion_sup: f64,
    violated: bool,
}

pub fn run(cfg: &ExperimentConfig, raw: &[u8], out: &OutputDir) -> Result<RunOutcome, HarnessError> {
    let manifold_spec = cfg.manifold.as_ref().unwrap();
    let m = manifold_spec.build()?;
    let model_spec = cfg.model.as_ref().unwrap();
    let model = model_spec.build()?;
    check_dims(&m, &model)?;

    let mut params = AssumptionParams { seed: cfg.seed, ..AssumptionParams::default() };
    if let Some(d) = &cfg.delta_grid {
        params.delta_grid = d.clone();
    }
    if let Some(b) = cfg.beta {
        params.beta = b;
    }
    let rep = assumption_report(&model, &m, &params)?;

    let report = Report {
        kind: "assumptions",
        manifold: manifold_spec.id(),
        model: model_spec.id(),
        alpha: model.alpha,
        c_min_alpha: rep.c_min_alpha,
        c_max_alpha: rep.c_max_alpha,
        q_samples: rep.q_samples.clone(),
        eta_margin: rep.eta_margin,
        v_check: rep.v_check,
        expansion_sup: rep.expansion_sup,
        violated: rep.violated(),
    };
    out.write_report(&report)?;

    let rows: Vec<Vec<String>> =
        report.q_samples.iter().map(|(d, q)| vec![fmt(*d), fmt(*q)]).collect();
    out.write_csv("q_of_delta", &["delta", "q_hat"], &rows)?;

    out.write_svg(
        "q_of_delta",
        &render_chart(
            "long-range covariance envelope",
            "delta",
            "Q-hat(delta)",
            &[Series {
                label: "mesh estimate".into(),
                points: report.q_samples.clone(),
                line: true,
                error: None,
            }],
        ),
    )?;
    out.write_manifest("assumptions", cfg.seed, raw, &[])?;

    let mut outcome = RunOutcome::default();
    if report.violated {
        outcome.violations.push(format!(
            "assumptions violated: eta_margin={}, v_check={}",
            report.eta_margin, report.v_check
        ));
    }
    Ok(outcome)
}
