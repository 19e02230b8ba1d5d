//! Deterministic pieces of the limit law: the minor norm, the scaling-field
//! integral over the unit-scale manifold, the threshold theta(z), the
//! double-exponential limit and the fixed-manifold tail asymptote.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::covariance::ScalingField;
use crate::error::{Error, Result};
use crate::geometry::{Chart, ParametrizedManifold};

/// `|G|_r = sqrt(sum of squared order-r minors) = sqrt(det(G^T G))`
/// (Cauchy-Binet). Rank-deficient input gives 0.
pub fn norm_r(g: &DMatrix<f64>) -> f64 {
    assert!(g.nrows() >= g.ncols() && g.ncols() >= 1, "need n >= r >= 1");
    (g.transpose() * g).determinant().max(0.0).sqrt()
}

/// Quadrature of `s -> |D0_s M_s|_r` over the unit-scale manifold, where
/// `M_s` is the orthonormal tangent frame. Refinement doubles the per-axis
/// resolution until the relative change drops below 1e-6 (cap 2^20 points
/// per chart).
pub fn manifold_integral(m: &ParametrizedManifold, sf: &ScalingField) -> Result<f64> {
    let mut total = 0.0;
    for chart in &m.charts {
        total += chart_quadrature(chart, |u| {
            let jac = chart.jacobian(u);
            let frame = jac.qr().q();
            norm_r(&(sf.at_unit(&chart.embed(u)) * frame))
        })?;
    }
    Ok(total)
}

const QUAD_REL_TOL: f64 = 1e-6;
const QUAD_REL_FAIL: f64 = 1e-4;
const QUAD_POINT_CAP: usize = 1 << 20;

fn chart_quadrature<F: Fn(&[f64]) -> f64>(chart: &Chart, f: F) -> Result<f64> {
    let r = chart.domain.len();
    let mut n_per_axis = 8usize;
    let mut prev: Option<f64> = None;
    let mut last_rel = f64::INFINITY;
    loop {
        let point_count = (n_per_axis + 1).pow(r as u32);
        if point_count > QUAD_POINT_CAP {
            break;
        }
        let v = tensor_sum(chart, &f, n_per_axis);
        if let Some(p) = prev {
            last_rel = (v - p).abs() / v.abs().max(f64::MIN_POSITIVE);
            if last_rel <= QUAD_REL_TOL {
                return Ok(v);
            }
        }
        prev = Some(v);
        n_per_axis *= 2;
    }
    if last_rel <= QUAD_REL_FAIL {
        Ok(prev.unwrap())
    } else {
        Err(Error::QuadratureNotConverged(last_rel))
    }
}

fn tensor_sum<F: Fn(&[f64]) -> f64>(chart: &Chart, f: &F, n_per_axis: usize) -> f64 {
    let r = chart.domain.len();
    let deltas: Vec<f64> = chart
        .domain
        .iter()
        .map(|(lo, hi)| (hi - lo) / n_per_axis as f64)
        .collect();
    let counts: Vec<usize> = chart
        .periodic
        .iter()
        .map(|&per| if per { n_per_axis } else { n_per_axis + 1 })
        .collect();
    let cell: f64 = deltas.iter().product();

    let mut index = vec![0usize; r];
    let mut sum = 0.0;
    loop {
        let u: Vec<f64> = index
            .iter()
            .zip(&chart.domain)
            .zip(&deltas)
            .map(|((i, (lo, _)), d)| lo + *i as f64 * d)
            .collect();
        let jac = chart.jacobian(&u);
        let vol = (jac.transpose() * &jac).determinant().max(0.0).sqrt();
        let mut w = vol * cell;
        for axis in 0..r {
            if !chart.periodic[axis] && (index[axis] == 0 || index[axis] == n_per_axis) {
                w *= 0.5;
            }
        }
        sum += w * f(&u);

        let mut axis = 0;
        loop {
            if axis == r {
                return sum;
            }
            index[axis] += 1;
            if index[axis] < counts[axis] {
                break;
            }
            index[axis] = 0;
            axis += 1;
        }
    }
}

/// Everything the threshold formula needs.
#[derive(Debug, Clone)]
pub struct LimitParams {
    pub r: usize,
    pub alpha: f64,
    /// The Pickands constant H_alpha^(r) (closed form or MC estimate).
    pub pickands_h: f64,
    /// The scaling-field integral over the unit-scale manifold.
    pub integral_i: f64,
    pub manifold_id: String,
    pub model_id: String,
}

impl LimitParams {
    pub fn new(r: usize, alpha: f64, pickands_h: f64, integral_i: f64) -> Result<Self> {
        crate::geometry::check_alpha(alpha)?;
        if r == 0 {
            return Err(Error::InvalidParameter("r must be >= 1".into()));
        }
        for (name, v) in [("pickands_h", pickands_h), ("integral_i", integral_i)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(LimitParams {
            r,
            alpha,
            pickands_h,
            integral_i,
            manifold_id: String::new(),
            model_id: String::new(),
        })
    }
}

/// The threshold sequence: with `a = sqrt(2 r log(1/h))` and
/// `k = r/alpha - 1/2`,
/// `theta = a + (z + k loglog(1/h) + log((2r)^k / sqrt(2 pi) * H * I)) / a`.
pub fn theta(z: f64, h: f64, p: &LimitParams) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidParameter(format!("theta needs h in (0,1), got {h}")));
    }
    let r = p.r as f64;
    let log_inv_h = -h.ln();
    let a = (2.0 * r * log_inv_h).sqrt();
    let k = r / p.alpha - 0.5;
    let constant = ((2.0 * r).powf(k) / (2.0 * PI).sqrt() * p.pickands_h * p.integral_i).ln();
    Ok(a + (z + k * log_inv_h.ln() + constant) / a)
}

/// The limiting law `exp(-2 exp(-z))` for the two-sided sup.
pub fn gumbel2(z: f64) -> f64 {
    (-2.0 * (-z).exp()).exp()
}

/// `Psi(u) = phi(u)/u`, the Gaussian tail surrogate.
pub fn psi(u: f64) -> Result<f64> {
    if u <= 0.0 {
        return Err(Error::InvalidParameter(format!("psi needs u > 0, got {u}")));
    }
    Ok((-0.5 * u * u).exp() / (2.0 * PI).sqrt() / u)
}

/// First-order exceedance prediction for a fixed manifold:
/// `x^(2r/alpha) Psi(x) H I`.
pub fn tail_asymptote(x: f64, p: &LimitParams, volume_integral: f64) -> Result<f64> {
    if volume_integral == 0.0 {
        return Ok(0.0);
    }
    Ok(x.powf(2.0 * p.r as f64 / p.alpha) * psi(x)? * p.pickands_h * volume_integral)
}

/// The normalization the threshold is built to satisfy:
/// `theta^(2r/alpha) Psi(theta) H (I / h^r) / exp(-z)`, which tends to 1.
pub fn theta_consistency(z: f64, h: f64, p: &LimitParams) -> Result<f64> {
    let th = theta(z, h, p)?;
    let lhs = th.powf(2.0 * p.r as f64 / p.alpha) * psi(th)? * p.pickands_h * p.integral_i
        / h.powi(p.r as i32);
    Ok(lhs / (-z).exp())
}
