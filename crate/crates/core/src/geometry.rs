//! Compact embedded manifolds, their rescalings `M_h = {t : h t in M_1}`,
//! tangent frames and mesh construction.
//!
//! Built-ins are parametrized by explicit charts; reach (condition number)
//! and volume are analytic per built-in. Meshes are uniform grids in chart
//! parameter space with the per-axis step calibrated by the embedding's
//! metric tensor, so realized geodesic spacing stays below the target.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::deformation::Deformation;
use crate::error::{Error, Result};

/// Sentinel reach for flat built-ins (the segment).
pub const REACH_UNBOUNDED: f64 = 1e300;

/// Default cap on mesh point count; keeps dense factorization feasible.
pub const DEFAULT_POINT_CAP: usize = 200_000;

type MapFn = dyn Fn(&[f64]) -> DVector<f64> + Send + Sync;
type JacFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// One chart: a parameter-domain box with the embedding and its Jacobian.
pub struct Chart {
    /// Per-axis parameter interval.
    pub domain: Vec<(f64, f64)>,
    /// Per-axis periodicity; a periodic axis identifies `hi` with `lo`.
    pub periodic: Vec<bool>,
    map: Arc<MapFn>,
    jac: Arc<JacFn>,
}

impl Chart {
    pub fn embed(&self, u: &[f64]) -> DVector<f64> {
        (self.map)(u)
    }

    pub fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        (self.jac)(u)
    }

    /// Diagonal metric entry `g_jj(u) = |d psi / d u_j|^2`.
    pub fn metric_diag(&self, u: &[f64], axis: usize) -> f64 {
        self.jacobian(u).column(axis).norm_squared()
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.domain.len()
            && u.iter()
                .zip(&self.domain)
                .all(|(x, (lo, hi))| *x >= lo - 1e-12 && *x <= hi + 1e-12)
    }
}

/// Built-in manifold kinds; `make_builtin` instantiates them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BuiltinKind {
    Circle { radius: f64 },
    DeformedCircle { radius: f64, deformation: Deformation },
    TorusSurface { major: f64, minor: f64 },
    Segment { length: f64 },
}

/// An r-dimensional compact manifold embedded in R^n via explicit charts.
pub struct ParametrizedManifold {
    pub intrinsic_dim: usize,
    pub ambient_dim: usize,
    pub charts: Vec<Chart>,
    /// Condition number Delta(M_1); positivity encodes bounded curvature.
    pub reach: f64,
    /// r-dimensional Hausdorff measure of M_1.
    pub volume: f64,
    pub kind: BuiltinKind,
}

/// A point identified by chart index and parameter value.
#[derive(Debug, Clone)]
pub struct ChartPoint {
    pub chart: usize,
    pub param: Vec<f64>,
}

/// Orthonormal tangent frame at a point of `M_h`.
#[derive(Debug)]
pub struct TangentFrame {
    pub base_point: DVector<f64>,
    /// n x r matrix with orthonormal columns spanning the tangent space.
    pub frame: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SpacingReport {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone)]
pub struct MeshPoint {
    pub chart: usize,
    pub param: Vec<f64>,
    pub position: DVector<f64>,
}

/// Discretization of `M_h` with quadrature weights.
#[derive(Debug)]
pub struct ManifoldMesh {
    pub scale: f64,
    pub points: Vec<MeshPoint>,
    pub weights: Vec<f64>,
    pub target_spacing: f64,
    pub spacing_report: SpacingReport,
}

impl ManifoldMesh {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn make_builtin(kind: BuiltinKind) -> Result<ParametrizedManifold> {
    match kind {
        BuiltinKind::Circle { radius } => {
            require_positive(radius, "circle radius")?;
            Ok(circle_manifold(radius, Deformation::Identity, kind))
        }
        BuiltinKind::DeformedCircle { radius, deformation } => {
            require_positive(radius, "circle radius")?;
            deformation.validate()?;
            Ok(circle_manifold(radius, deformation, kind))
        }
        BuiltinKind::TorusSurface { major, minor } => {
            require_positive(major, "torus major radius")?;
            require_positive(minor, "torus minor radius")?;
            if major <= minor {
                return Err(Error::InvalidGeometry(format!(
                    "torus requires R > rho for positive reach, got R={major}, rho={minor}"
                )));
            }
            Ok(torus_manifold(major, minor, kind))
        }
        BuiltinKind::Segment { length } => {
            require_positive(length, "segment length")?;
            Ok(segment_manifold(length, kind))
        }
    }
}

fn require_positive(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidGeometry(format!("{what} must be positive and finite, got {x}")))
    }
}

fn circle_manifold(radius: f64, phi: Deformation, kind: BuiltinKind) -> ParametrizedManifold {
    let map = Arc::new(move |u: &[f64]| {
        let p = DVector::from_vec(vec![radius * u[0].cos(), radius * u[0].sin()]);
        phi.apply(&p)
    });
    let jac = Arc::new(move |u: &[f64]| {
        let p = DVector::from_vec(vec![radius * u[0].cos(), radius * u[0].sin()]);
        let dp = DMatrix::from_column_slice(2, 1, &[-radius * u[0].sin(), radius * u[0].cos()]);
        phi.jacobian(&p) * dp
    });
    // A radial deformation maps the circle of radius rho to the circle of
    // radius phi(rho), so reach and volume stay analytic.
    let image_radius = phi.image_radius(radius);
    ParametrizedManifold {
        intrinsic_dim: 1,
        ambient_dim: 2,
        charts: vec![Chart {
            domain: vec![(0.0, TAU)],
            periodic: vec![true],
            map,
            jac,
        }],
        reach: image_radius,
        volume: TAU * image_radius,
        kind,
    }
}

fn torus_manifold(major: f64, minor: f64, kind: BuiltinKind) -> ParametrizedManifold {
    let map = Arc::new(move |u: &[f64]| {
        let (t, p) = (u[0], u[1]);
        let w = major + minor * p.cos();
        DVector::from_vec(vec![w * t.cos(), w * t.sin(), minor * p.sin()])
    });
    let jac = Arc::new(move |u: &[f64]| {
        let (t, p) = (u[0], u[1]);
        let w = major + minor * p.cos();
        DMatrix::from_column_slice(
            3,
            2,
            &[
                // d/dt
                -w * t.sin(),
                w * t.cos(),
                0.0,
                // d/dp
                -minor * p.sin() * t.cos(),
                -minor * p.sin() * t.sin(),
                minor * p.cos(),
            ],
        )
    });
    ParametrizedManifold {
        intrinsic_dim: 2,
        ambient_dim: 3,
        charts: vec![Chart {
            domain: vec![(0.0, TAU), (0.0, TAU)],
            periodic: vec![true, true],
            map,
            jac,
        }],
        reach: minor.min(major - minor),
        volume: 4.0 * PI * PI * major * minor,
        kind,
    }
}

fn segment_manifold(length: f64, kind: BuiltinKind) -> ParametrizedManifold {
    let map = Arc::new(move |u: &[f64]| DVector::from_vec(vec![u[0]]));
    let jac = Arc::new(move |_u: &[f64]| DMatrix::from_element(1, 1, 1.0));
    ParametrizedManifold {
        intrinsic_dim: 1,
        ambient_dim: 1,
        charts: vec![Chart {
            domain: vec![(0.0, length)],
            periodic: vec![false],
            map,
            jac,
        }],
        reach: REACH_UNBOUNDED,
        volume: length,
        kind,
    }
}

/// Orthonormal frame spanning the tangent space of `M_h` at the given
/// chart point, from a thin QR of the rescaled Jacobian.
pub fn tangent_frame(m: &ParametrizedManifold, h: f64, at: &ChartPoint) -> Result<TangentFrame> {
    check_scale(h)?;
    let chart = m
        .charts
        .get(at.chart)
        .ok_or_else(|| Error::OutsideDomain(format!("no chart {}", at.chart)))?;
    if !chart.contains(&at.param) {
        return Err(Error::OutsideDomain(format!(
            "parameter {:?} outside chart {} domain",
            at.param, at.chart
        )));
    }
    let j = chart.jacobian(&at.param) / h;
    let sv = j.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if smin <= 0.0 || smax / smin > 1e12 {
        return Err(Error::RankDeficient(if smin > 0.0 { smax / smin } else { f64::INFINITY }));
    }
    let q = j.qr().q();
    Ok(TangentFrame {
        base_point: chart.embed(&at.param) / h,
        frame: q,
    })
}

fn check_scale(h: f64) -> Result<()> {
    if h > 0.0 && h <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("scale h must lie in (0,1], got {h}")))
    }
}

/// Grid spacing prescribed by the threshold: `gamma * theta^(-2/alpha)`.
pub fn mesh_spacing_for_theta(gamma: f64, theta: f64, alpha: f64) -> Result<f64> {
    if gamma <= 0.0 {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    if theta <= 0.0 {
        return Err(Error::InvalidParameter(format!("theta must be positive, got {theta}")));
    }
    check_alpha(alpha)?;
    Ok(gamma * theta.powf(-2.0 / alpha))
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must lie in (0,2], got {alpha}")))
    }
}

pub fn build_mesh(m: &ParametrizedManifold, h: f64, target_spacing: f64) -> Result<ManifoldMesh> {
    build_mesh_capped(m, h, target_spacing, DEFAULT_POINT_CAP)
}

pub fn build_mesh_capped(
    m: &ParametrizedManifold,
    h: f64,
    target_spacing: f64,
    cap: usize,
) -> Result<ManifoldMesh> {
    check_scale(h)?;
    if !(target_spacing > 0.0 && target_spacing.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "target spacing must be positive and finite, got {target_spacing}"
        )));
    }
    // Chart-local meshing needs spacing below the rescaled injectivity
    // scale; pi * reach/h is the half-circumference of the worst
    // osculating circle.
    if target_spacing >= PI * m.reach / h {
        return Err(Error::InvalidParameter(format!(
            "target spacing {target_spacing} too coarse for reach {} at scale {h}",
            m.reach
        )));
    }

    let r = m.intrinsic_dim;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut spacing_min = f64::INFINITY;
    let mut spacing_max: f64 = 0.0;
    let mut spacing_sum = 0.0;
    let mut spacing_count = 0usize;

    for (chart_id, chart) in m.charts.iter().enumerate() {
        let steps = chart_steps(chart, h, target_spacing)?;
        let counts: Vec<usize> = steps
            .iter()
            .zip(&chart.periodic)
            .map(|(s, per)| if *per { s.n } else { s.n + 1 })
            .collect();
        let total: usize = counts.iter().product();
        let needed = points.len() + total;
        if needed > cap {
            return Err(Error::SpacingTooSmall { needed, cap });
        }

        let mut index = vec![0usize; r];
        loop {
            let param: Vec<f64> = index
                .iter()
                .zip(&steps)
                .map(|(i, s)| s.lo + (*i as f64) * s.delta)
                .collect();

            let jac = chart.jacobian(&param);
            let gram = jac.transpose() * &jac;
            let vol_elem = gram.determinant().max(0.0).sqrt() / h.powi(r as i32);

            let mut w = vol_elem * steps.iter().map(|s| s.delta).product::<f64>();
            for (axis, s) in steps.iter().enumerate() {
                if !chart.periodic[axis] && (index[axis] == 0 || index[axis] == s.n) {
                    w *= 0.5;
                }
            }

            // Geodesic spacing to the next neighbor along each axis,
            // approximated via the metric at the cell midpoint.
            for (axis, s) in steps.iter().enumerate() {
                let has_neighbor = chart.periodic[axis] || index[axis] < s.n;
                if has_neighbor {
                    let mut mid = param.clone();
                    mid[axis] += 0.5 * s.delta;
                    let d = chart.metric_diag(&mid, axis).sqrt() * s.delta / h;
                    spacing_min = spacing_min.min(d);
                    spacing_max = spacing_max.max(d);
                    spacing_sum += d;
                    spacing_count += 1;
                }
            }

            points.push(MeshPoint {
                chart: chart_id,
                param: param.clone(),
                position: chart.embed(&param) / h,
            });
            weights.push(w);

            // advance tensor index
            let mut axis = 0;
            loop {
                if axis == r {
                    break;
                }
                index[axis] += 1;
                if index[axis] < counts[axis] {
                    break;
                }
                index[axis] = 0;
                axis += 1;
            }
            if axis == r {
                break;
            }
        }
    }

    Ok(ManifoldMesh {
        scale: h,
        points,
        weights,
        target_spacing,
        spacing_report: SpacingReport {
            min: spacing_min,
            max: spacing_max,
            mean: spacing_sum / spacing_count.max(1) as f64,
        },
    })
}

struct AxisSteps {
    lo: f64,
    delta: f64,
    /// number of cells along the axis
    n: usize,
}

fn chart_steps(chart: &Chart, h: f64, target: f64) -> Result<Vec<AxisSteps>> {
    let r = chart.domain.len();
    let probe = probe_grid(chart, if r > 1 { 17 } else { 129 });
    (0..r)
        .map(|axis| {
            let (lo, hi) = chart.domain[axis];
            let sup_g = probe
                .iter()
                .map(|u| chart.metric_diag(u, axis).sqrt())
                .fold(0.0f64, f64::max);
            if sup_g <= 0.0 {
                return Err(Error::InvalidGeometry(format!(
                    "degenerate metric along axis {axis}"
                )));
            }
            let n = ((hi - lo) * sup_g / (h * target)).ceil().max(1.0) as usize;
            Ok(AxisSteps {
                lo,
                delta: (hi - lo) / n as f64,
                n,
            })
        })
        .collect()
}

fn probe_grid(chart: &Chart, per_axis: usize) -> Vec<Vec<f64>> {
    let r = chart.domain.len();
    let mut grid = vec![vec![]];
    for axis in 0..r {
        let (lo, hi) = chart.domain[axis];
        let mut next = Vec::with_capacity(grid.len() * per_axis);
        for base in &grid {
            for k in 0..per_axis {
                let mut u = base.clone();
                u.push(lo + (hi - lo) * k as f64 / (per_axis - 1) as f64);
                next.push(u);
            }
        }
        grid = next;
    }
    grid
}
