//! The four experiment drivers.

pub mod assumptions;
pub mod limit_law;
pub mod pickands;
pub mod tail;

use std::f64::consts::PI;

use manifold_extremes::covariance::{CovarianceModel, Family};
use manifold_extremes::geometry::ParametrizedManifold;
use manifold_extremes::pickands::{estimate_h, extrapolate_h, PickandsEstimate};

use crate::config::LadderRung;
use crate::report::derive_seed;
use crate::HarnessError;

/// What a run wants the process exit status to reflect.
#[derive(Debug, Default)]
pub struct RunOutcome {
    /// Assumption violations or convergence flags; nonempty means a
    /// distinct (nonzero) exit status.
    pub violations: Vec<String>,
}

pub(crate) fn check_dims(
    m: &ParametrizedManifold,
    model: &CovarianceModel,
) -> Result<(), HarnessError> {
    let needed = match &model.family {
        Family::PoweredExponential { d } => Some(d.nrows()),
        Family::SpaceDeformation { .. } => None,
        Family::MovingAverage => Some(1),
    };
    if let Some(n) = needed {
        if n != m.ambient_dim {
            return Err(HarnessError::Config(format!(
                "model acts on R^{n} but the manifold is embedded in R^{}",
                m.ambient_dim
            )));
        }
    }
    Ok(())
}

/// The Pickands constant for the threshold formula: closed form
/// `pi^(-r/2)` at alpha = 2, otherwise a Monte Carlo ladder on the
/// boundary-corrected rate.
pub(crate) fn resolve_pickands_h(
    alpha: f64,
    r: usize,
    ladder: Option<&[LadderRung]>,
    seed: u64,
    warnings: &mut Vec<String>,
) -> Result<(f64, String), HarnessError> {
    if alpha == 2.0 {
        return Ok((PI.powf(-(r as f64) / 2.0), "closed_form".into()));
    }
    let default_r1 = [
        LadderRung { l: 25, gamma: 0.2 },
        LadderRung { l: 50, gamma: 0.1 },
        LadderRung { l: 100, gamma: 0.05 },
    ];
    let default_r2 = [
        LadderRung { l: 5, gamma: 0.2 },
        LadderRung { l: 10, gamma: 0.1 },
        LadderRung { l: 20, gamma: 0.05 },
    ];
    let rungs: &[LadderRung] = match ladder {
        Some(l) => l,
        None if r == 1 => &default_r1,
        None => &default_r2,
    };
    let reps = 20_000;
    let ests: Vec<PickandsEstimate> = rungs
        .iter()
        .enumerate()
        .map(|(i, rung)| estimate_h(alpha, r, rung.l, rung.gamma, reps, derive_seed(seed, 1000 + i as u64)))
        .collect::<Result<_, _>>()?;
    let out = extrapolate_h(&ests)?;
    if !out.converged {
        warnings.push("pickands ladder for the threshold constant did not converge".into());
    }
    Ok((out.h_hat, format!("mc_ladder(reps={reps})")))
}
