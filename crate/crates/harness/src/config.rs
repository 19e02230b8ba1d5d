//! Declarative experiment configs (TOML). Unknown keys are hard errors.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use manifold_extremes::covariance::CovarianceModel;
use manifold_extremes::deformation::Deformation;
use manifold_extremes::geometry::{make_builtin, BuiltinKind, ParametrizedManifold};

use crate::HarnessError;

/// Largest scale the threshold formula is exercised at: below e^-1 with a
/// 10% safety margin, so the loglog term stays well-defined.
pub const MAX_SCALE: f64 = 0.9 / std::f64::consts::E;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    LimitLaw,
    Tail,
    Pickands,
    Assumptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldSpec {
    Circle { radius: f64 },
    DeformedCircle { radius: f64, a: f64, b: f64 },
    TorusSurface { major: f64, minor: f64 },
    Segment { length: f64 },
}

impl ManifoldSpec {
    pub fn build(&self) -> Result<ParametrizedManifold, HarnessError> {
        let kind = match *self {
            ManifoldSpec::Circle { radius } => BuiltinKind::Circle { radius },
            ManifoldSpec::DeformedCircle { radius, a, b } => BuiltinKind::DeformedCircle {
                radius,
                deformation: Deformation::RadialStretch { a, b },
            },
            ManifoldSpec::TorusSurface { major, minor } => BuiltinKind::TorusSurface { major, minor },
            ManifoldSpec::Segment { length } => BuiltinKind::Segment { length },
        };
        Ok(make_builtin(kind)?)
    }

    pub fn id(&self) -> String {
        match self {
            ManifoldSpec::Circle { radius } => format!("circle({radius})"),
            ManifoldSpec::DeformedCircle { radius, a, b } => {
                format!("deformed_circle({radius},a={a},b={b})")
            }
            ManifoldSpec::TorusSurface { major, minor } => format!("torus_surface({major},{minor})"),
            ManifoldSpec::Segment { length } => format!("segment({length})"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiSpec {
    Identity,
    RadialStretch { a: f64, b: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    PoweredExponential { alpha: f64, d: Vec<Vec<f64>> },
    Deformation { alpha: f64, phi: PhiSpec },
    MovingAverage,
}

impl ModelSpec {
    pub fn build(&self) -> Result<CovarianceModel, HarnessError> {
        match self {
            ModelSpec::PoweredExponential { alpha, d } => {
                let n = d.len();
                if n == 0 || d.iter().any(|row| row.len() != n) {
                    return Err(HarnessError::Config(
                        "powered_exponential needs a square scaling matrix".into(),
                    ));
                }
                let m = DMatrix::from_fn(n, n, |i, j| d[i][j]);
                Ok(CovarianceModel::powered_exponential(*alpha, m)?)
            }
            ModelSpec::Deformation { alpha, phi } => {
                let phi = match *phi {
                    PhiSpec::Identity => Deformation::Identity,
                    PhiSpec::RadialStretch { a, b } => Deformation::RadialStretch { a, b },
                };
                Ok(CovarianceModel::space_deformation(*alpha, phi)?)
            }
            ModelSpec::MovingAverage => Ok(CovarianceModel::moving_average()),
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            ModelSpec::PoweredExponential { alpha, .. } | ModelSpec::Deformation { alpha, .. } => {
                *alpha
            }
            ModelSpec::MovingAverage => 2.0,
        }
    }

    pub fn id(&self) -> String {
        match self {
            ModelSpec::PoweredExponential { alpha, d } => {
                format!("powered_exponential(alpha={alpha},n={})", d.len())
            }
            ModelSpec::Deformation { alpha, phi } => {
                let p = match phi {
                    PhiSpec::Identity => "identity".to_string(),
                    PhiSpec::RadialStretch { a, b } => format!("radial_stretch({a},{b})"),
                };
                format!("deformation(alpha={alpha},phi={p})")
            }
            ModelSpec::MovingAverage => "moving_average".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderRung {
    pub l: usize,
    pub gamma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub reps: usize,
    /// Grid constant of the spacing rule gamma * theta^(-2/alpha).
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_mesh_cap")]
    pub mesh_cap: usize,

    pub manifold: Option<ManifoldSpec>,
    pub model: Option<ModelSpec>,

    // limit-law
    pub h_list: Option<Vec<f64>>,
    pub z_grid: Option<Vec<f64>>,

    // tail
    pub x_grid: Option<Vec<f64>>,

    // pickands
    pub alpha: Option<f64>,
    pub r: Option<usize>,
    pub ladder: Option<Vec<LadderRung>>,

    // assumptions
    pub delta_grid: Option<Vec<f64>>,
    pub beta: Option<f64>,
}

fn default_gamma() -> f64 {
    0.25
}

fn default_mesh_cap() -> usize {
    manifold_extremes::geometry::DEFAULT_POINT_CAP
}

/// Default z grid: spans the limit CDF from 0.004 to 0.76.
pub fn default_z_grid() -> Vec<f64> {
    vec![-1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0]
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<(Self, Vec<u8>), HarnessError> {
        let bytes = std::fs::read(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| HarnessError::Config(format!("config is not UTF-8: {e}")))?;
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok((cfg, bytes))
    }

    pub fn validate(&self, expected: ExperimentKind) -> Result<(), HarnessError> {
        if self.kind != expected {
            return Err(HarnessError::Config(format!(
                "config kind {:?} does not match the {:?} subcommand",
                self.kind, expected
            )));
        }
        if self.reps < 100 {
            return Err(HarnessError::Config(format!(
                "reps must be >= 100, got {}",
                self.reps
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(HarnessError::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        match expected {
            ExperimentKind::LimitLaw => {
                let h_list = self.require("h_list", &self.h_list)?;
                if h_list.is_empty() {
                    return Err(HarnessError::Config("h_list must be nonempty".into()));
                }
                for w in h_list.windows(2) {
                    if !(w[1] < w[0]) {
                        return Err(HarnessError::Config(
                            "h_list must be strictly decreasing".into(),
                        ));
                    }
                }
                if h_list.iter().any(|&h| !(h > 0.0 && h < MAX_SCALE)) {
                    return Err(HarnessError::Config(format!(
                        "all scales must lie in (0, {MAX_SCALE:.4})"
                    )));
                }
                let z = self.z_grid.clone().unwrap_or_else(default_z_grid);
                if z.is_empty() || z.iter().any(|v| !v.is_finite()) {
                    return Err(HarnessError::Config("z_grid must be finite and nonempty".into()));
                }
                self.require("manifold", &self.manifold)?;
                self.require("model", &self.model)?;
            }
            ExperimentKind::Tail => {
                let x = self.require("x_grid", &self.x_grid)?;
                if x.is_empty() || x.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(HarnessError::Config(
                        "x_grid must be nonempty with positive finite thresholds".into(),
                    ));
                }
                self.require("manifold", &self.manifold)?;
                self.require("model", &self.model)?;
            }
            ExperimentKind::Pickands => {
                let alpha = *self.require("alpha", &self.alpha)?;
                if !(alpha > 0.0 && alpha <= 2.0) {
                    return Err(HarnessError::Config(format!("alpha must be in (0,2], got {alpha}")));
                }
                let r = *self.require("r", &self.r)?;
                if r == 0 {
                    return Err(HarnessError::Config("r must be >= 1".into()));
                }
                let ladder = self.require("ladder", &self.ladder)?;
                if ladder.len() < 3 {
                    return Err(HarnessError::Config("ladder needs >= 3 rungs".into()));
                }
            }
            ExperimentKind::Assumptions => {
                self.require("manifold", &self.manifold)?;
                self.require("model", &self.model)?;
                if let Some(d) = &self.delta_grid {
                    if d.is_empty() || d.iter().any(|v| !(*v > 0.0)) {
                        return Err(HarnessError::Config("delta_grid must be positive".into()));
                    }
                }
            }
        }
        Ok(())
    }

    fn require<'a, T>(&self, name: &str, field: &'a Option<T>) -> Result<&'a T, HarnessError> {
        field
            .as_ref()
            .ok_or_else(|| HarnessError::Config(format!("missing required field `{name}`")))
    }
}
