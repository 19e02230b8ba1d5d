//! Limit-law verification: empirical P(sup |X_h| <= theta(z)) against the
//! double-exponential limit, across a ladder of scales h.

use serde::Serialize;

use manifold_extremes::covariance::{assumption_report, AssumptionParams};
use manifold_extremes::geometry::{build_mesh_capped, mesh_spacing_for_theta};
use manifold_extremes::limits::{gumbel2, manifold_integral, theta, LimitParams};
use manifold_extremes::sampler::{empirical_exceedance, factorize, sample_sups, ExceedanceMode};

use crate::config::{default_z_grid, ExperimentConfig, ManifoldSpec};
use crate::experiments::{check_dims, resolve_pickands_h, RunOutcome};
use crate::report::{derive_seed, fmt, OutputDir};
use crate::svg::{render_chart, Series};
use crate::HarnessError;

#[derive(Serialize)]
struct Row {
    h: f64,
    z: f64,
    theta: f64,
    empirical: f64,
    stderr: f64,
    limit: f64,
    deviation: f64,
    one_sided_empirical: f64,
    one_sided_limit: f64,
}

#[derive(Serialize)]
struct ScaleSummary {
    h: f64,
    mesh_points: usize,
    target_spacing: f64,
    realized_spacing_max: f64,
    jitter_used: f64,
    seed: u64,
    sup_deviation: f64,
}

#[derive(Serialize)]
struct Report {
    kind: &'static str,
    manifold: String,
    model: String,
    r: usize,
    alpha: f64,
    pickands_h: f64,
    pickands_source: String,
    integral: f64,
    reps: usize,
    scales: Vec<ScaleSummary>,
    table: Vec<Row>,
    warnings: Vec<String>,
}

pub fn run(cfg: &ExperimentConfig, raw: &[u8], out: &OutputDir) -> Result<RunOutcome, HarnessError> {
    let manifold_spec = cfg.manifold.as_ref().unwrap();
    if matches!(manifold_spec, ManifoldSpec::Segment { .. }) {
        return Err(HarnessError::Config(
            "the segment has a boundary; limit-law runs need a closed manifold".into(),
        ));
    }
    let m = manifold_spec.build()?;
    let model_spec = cfg.model.as_ref().unwrap();
    let model = model_spec.build()?;
    check_dims(&m, &model)?;

    let alpha = model.alpha;
    let r = m.intrinsic_dim;
    let mut warnings = Vec::new();

    let (pickands_h, pickands_source) = resolve_pickands_h(
        alpha,
        r,
        cfg.ladder.as_deref(),
        cfg.seed,
        &mut warnings,
    )?;
    let sf = model.scaling_field();
    let integral = manifold_integral(&m, &sf)?;
    let mut params = LimitParams::new(r, alpha, pickands_h, integral)?;
    params.manifold_id = manifold_spec.id();
    params.model_id = model_spec.id();

    // cheap assumption screen at moderate scales
    let screen = assumption_report(
        &model,
        &m,
        &AssumptionParams {
            h_list: vec![1.0, 0.5],
            mesh_target: 0.2,
            ..AssumptionParams::default()
        },
    )?;
    if screen.violated() {
        warnings.push(format!(
            "covariance assumptions violated: eta_margin={}, v_check={}",
            screen.eta_margin, screen.v_check
        ));
    }

    let z_grid = cfg.z_grid.clone().unwrap_or_else(default_z_grid);
    let z_min = z_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let h_list = cfg.h_list.as_ref().unwrap();

    let mut table = Vec::new();
    let mut scales = Vec::new();
    let mut seeds = Vec::new();
    for (hi, &h) in h_list.iter().enumerate() {
        let thetas: Vec<f64> =
            z_grid.iter().map(|&z| theta(z, h, &params)).collect::<Result<_, _>>()?;
        // theta is increasing in z, so the smallest z gives the spacing
        // the whole grid must honor
        let spacing = mesh_spacing_for_theta(cfg.gamma, theta(z_min, h, &params)?, alpha)?;
        let mesh = build_mesh_capped(&m, h, spacing, cfg.mesh_cap)?;
        let fc = factorize(&model, h, &mesh)?;
        let seed_h = derive_seed(cfg.seed, hi as u64);
        seeds.push((format!("h={h}"), seed_h));
        let batch = sample_sups(&fc, cfg.reps, seed_h);

        let two_sided = empirical_exceedance(&batch, &thetas, ExceedanceMode::Abs);
        let n = cfg.reps as f64;
        let mut sup_dev: f64 = 0.0;
        for ((&z, &th), &(p, se)) in z_grid.iter().zip(&thetas).zip(&two_sided) {
            let limit = gumbel2(z);
            let one_sided =
                batch.sup_pos.iter().filter(|&&s| s <= th).count() as f64 / n;
            let deviation = (p - limit).abs();
            sup_dev = sup_dev.max(deviation);
            table.push(Row {
                h,
                z,
                theta: th,
                empirical: p,
                stderr: se,
                limit,
                deviation,
                one_sided_empirical: one_sided,
                one_sided_limit: (-(-z).exp()).exp(),
            });
        }
        scales.push(ScaleSummary {
            h,
            mesh_points: mesh.len(),
            target_spacing: spacing,
            realized_spacing_max: mesh.spacing_report.max,
            jitter_used: fc.jitter_used,
            seed: seed_h,
            sup_deviation: sup_dev,
        });
    }

    let report = Report {
        kind: "limit_law",
        manifold: params.manifold_id.clone(),
        model: params.model_id.clone(),
        r,
        alpha,
        pickands_h,
        pickands_source,
        integral,
        reps: cfg.reps,
        scales,
        table,
        warnings: warnings.clone(),
    };
    emit(&report, cfg, raw, out, &z_grid, &seeds)?;

    Ok(RunOutcome { violations: warnings })
}

fn emit(
    report: &Report,
    cfg: &ExperimentConfig,
    raw: &[u8],
    out: &OutputDir,
    z_grid: &[f64],
    seeds: &[(String, u64)],
) -> Result<(), HarnessError> {
    out.write_report(report)?;

    let header = [
        "h",
        "z",
        "theta",
        "empirical",
        "stderr",
        "limit",
        "deviation",
        "one_sided_empirical",
        "one_sided_limit",
    ];
    let rows: Vec<Vec<String>> = report
        .table
        .iter()
        .map(|r| {
            vec![
                fmt(r.h),
                fmt(r.z),
                fmt(r.theta),
                fmt(r.empirical),
                fmt(r.stderr),
                fmt(r.limit),
                fmt(r.deviation),
                fmt(r.one_sided_empirical),
                fmt(r.one_sided_limit),
            ]
        })
        .collect();
    out.write_csv("limit_law", &header, &rows)?;

    let dev_rows: Vec<Vec<String>> = report
        .scales
        .iter()
        .map(|s| vec![fmt(s.h), s.mesh_points.to_string(), fmt(s.sup_deviation)])
        .collect();
    out.write_csv("limit_law_deviation", &["h", "mesh_points", "sup_deviation"], &dev_rows)?;

    // limit curve plus one empirical series per scale
    let z_lo = z_grid.iter().cloned().fold(f64::INFINITY, f64::min) - 0.3;
    let z_hi = z_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 0.3;
    let mut series = vec![Series {
        label: "exp(-2e^-z)".into(),
        points: (0..=100)
            .map(|i| {
                let z = z_lo + (z_hi - z_lo) * i as f64 / 100.0;
                (z, gumbel2(z))
            })
            .collect(),
        line: true,
        error: None,
    }];
    for s in &report.scales {
        let pts: Vec<&Row> = report.table.iter().filter(|r| r.h == s.h).collect();
        series.push(Series {
            label: format!("h={}", fmt(s.h)),
            points: pts.iter().map(|r| (r.z, r.empirical)).collect(),
            line: false,
            error: Some(pts.iter().map(|r| r.stderr).collect()),
        });
    }
    out.write_svg(
        "limit_law",
        &render_chart("empirical sup-law vs limit", "z", "P(sup |X| <= theta(z))", &series),
    )?;

    out.write_manifest("limit_law", cfg.seed, raw, seeds)
}
