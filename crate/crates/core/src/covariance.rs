//! Covariance families with exact local structure `r_h ~ 1 - |D_t(t1-t2)|^a`
//! near every point, plus diagnostics for the ellipticity and long-range
//! decay assumptions they are supposed to satisfy.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::deformation::Deformation;
use crate::error::{Error, Result};
use crate::geometry::{build_mesh, check_alpha, ManifoldMesh, ParametrizedManifold};

/// The local scaling matrices: `d0(t*)` at unit scale, `D_t^h = d0(h t)`.
#[derive(Clone)]
pub struct ScalingField {
    d0: Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>,
}

impl ScalingField {
    pub fn constant(d: DMatrix<f64>) -> Self {
        ScalingField {
            d0: Arc::new(move |_| d.clone()),
        }
    }

    /// `D0_{t*}` for `t*` on the unit-scale domain.
    pub fn at_unit(&self, t_star: &DVector<f64>) -> DMatrix<f64> {
        (self.d0)(t_star)
    }

    /// `D_t^h = D0_{h t}` for `t` on the rescaled domain.
    pub fn at_scale(&self, h: f64, t: &DVector<f64>) -> DMatrix<f64> {
        self.at_unit(&(t * h))
    }
}

#[derive(Clone)]
pub enum Family {
    /// `exp(-|D (t1-t2)|^alpha)` with a constant non-degenerate matrix.
    PoweredExponential { d: DMatrix<f64> },
    /// `exp(-|phi(h t1)/h - phi(h t2)/h|^alpha)`; scaling field `Jphi(h t)`.
    SpaceDeformation { phi: Deformation },
    /// Epanechnikov moving average on the line; autocorrelation
    /// `(K*K)(tau)/(K*K)(0)`, identically zero past lag 2. alpha = 2.
    MovingAverage,
}

#[derive(Clone)]
pub struct CovarianceModel {
    pub alpha: f64,
    pub family: Family,
    /// Lag beyond which the covariance vanishes exactly; infinite unless
    /// the family has compact support.
    pub support_radius: f64,
    /// Optional compact evaluation domain at unit scale (per-axis box);
    /// `cov` rejects points whose rescaled image leaves it.
    pub domain: Option<Vec<(f64, f64)>>,
}

/// Squared local scale of the Epanechnikov moving average: `-rho''(0)/2`.
pub const MOVING_AVERAGE_D_SQUARED: f64 = 1.25;

/// Normalized autocorrelation of the Epanechnikov kernel `3/4 (1-x^2)` on
/// `[-1,1]` convolved with itself: `(2-|tau|)^3 (tau^2+6|tau|+4)/32`.
pub fn epanechnikov_autocorrelation(tau: f64) -> f64 {
    let a = tau.abs();
    if a >= 2.0 {
        0.0
    } else {
        let c = 2.0 - a;
        c * c * c * (a * a + 6.0 * a + 4.0) / 32.0
    }
}

impl CovarianceModel {
    pub fn powered_exponential(alpha: f64, d: DMatrix<f64>) -> Result<Self> {
        check_alpha(alpha)?;
        if d.nrows() != d.ncols() || d.nrows() == 0 {
            return Err(Error::InvalidParameter(format!(
                "scaling matrix must be square and nonempty, got {}x{}",
                d.nrows(),
                d.ncols()
            )));
        }
        let sv = d.clone().svd(false, false).singular_values;
        if !(sv.min() > 0.0) || !sv.max().is_finite() {
            return Err(Error::InvalidParameter(
                "scaling matrix must be non-degenerate with finite entries".into(),
            ));
        }
        Ok(CovarianceModel {
            alpha,
            family: Family::PoweredExponential { d },
            support_radius: f64::INFINITY,
            domain: None,
        })
    }

    pub fn space_deformation(alpha: f64, phi: Deformation) -> Result<Self> {
        check_alpha(alpha)?;
        phi.validate()?;
        Ok(CovarianceModel {
            alpha,
            family: Family::SpaceDeformation { phi },
            support_radius: f64::INFINITY,
            domain: None,
        })
    }

    pub fn moving_average() -> Self {
        CovarianceModel {
            alpha: 2.0,
            family: Family::MovingAverage,
            support_radius: 2.0,
            domain: None,
        }
    }

    pub fn with_domain(mut self, unit_scale_box: Vec<(f64, f64)>) -> Self {
        self.domain = Some(unit_scale_box);
        self
    }

    /// The induced scaling field `D_t^h = D0(h t)`.
    pub fn scaling_field(&self) -> ScalingField {
        match &self.family {
            Family::PoweredExponential { d } => ScalingField::constant(d.clone()),
            Family::SpaceDeformation { phi } => {
                let phi = *phi;
                ScalingField {
                    d0: Arc::new(move |t_star| phi.jacobian(t_star)),
                }
            }
            Family::MovingAverage => {
                ScalingField::constant(DMatrix::from_element(1, 1, MOVING_AVERAGE_D_SQUARED.sqrt()))
            }
        }
    }

    pub fn cov(&self, h: f64, t1: &DVector<f64>, t2: &DVector<f64>) -> Result<f64> {
        if let Some(domain) = &self.domain {
            for t in [t1, t2] {
                let inside = t.len() == domain.len()
                    && t.iter()
                        .zip(domain)
                        .all(|(x, (lo, hi))| h * x >= *lo && h * x <= *hi);
                if !inside {
                    return Err(Error::OutsideDomain(format!(
                        "rescaled point {:?} leaves the covariance domain at h={h}",
                        t.as_slice()
                    )));
                }
            }
        }
        Ok(self.cov_unchecked(h, t1, t2))
    }

    /// The family formula without the domain guard; used internally where
    /// arguments are constructed on the domain already.
    pub fn cov_unchecked(&self, h: f64, t1: &DVector<f64>, t2: &DVector<f64>) -> f64 {
        match &self.family {
            Family::PoweredExponential { d } => {
                let lag = d * (t1 - t2);
                (-lag.norm().powf(self.alpha)).exp()
            }
            Family::SpaceDeformation { phi } => {
                let a = phi.apply(&(t1 * h)) / h;
                let b = phi.apply(&(t2 * h)) / h;
                (-(a - b).norm().powf(self.alpha)).exp()
            }
            Family::MovingAverage => epanechnikov_autocorrelation((t1 - t2).norm()),
        }
    }
}

/// Bounding box of the unit-scale manifold, enlarged by 10% about its
/// center — the compact evaluation domain the covariance is checked on.
pub fn unit_scale_bounding_box(m: &ParametrizedManifold) -> Result<Vec<(f64, f64)>> {
    let mesh = build_mesh(m, 1.0, (m.reach.min(1.0) * 0.1).min(0.5))?;
    let n = m.ambient_dim;
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for p in &mesh.points {
        for i in 0..n {
            lo[i] = lo[i].min(p.position[i]);
            hi[i] = hi[i].max(p.position[i]);
        }
    }
    Ok(lo
        .into_iter()
        .zip(hi)
        .map(|(a, b)| {
            let c = 0.5 * (a + b);
            let half = 0.55 * (b - a).max(1e-9); // 10% margin
            (c - half, c + half)
        })
        .collect())
}

/// Worst relative defect of the first-order expansion
/// `r_h(t1,t2) ~ 1 - |D_s^h (t1-t2)|^alpha` over sampled pairs near `s`.
pub fn local_expansion_error(
    model: &CovarianceModel,
    h: f64,
    s: &DVector<f64>,
    radius: f64,
    n_pairs: usize,
    seed: u64,
) -> f64 {
    let d_s = model.scaling_field().at_scale(h, s);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = s.len();
    let mut worst: f64 = 0.0;
    let draw = |rng: &mut ChaCha8Rng| -> DVector<f64> {
        // uniform in the radius-ball via rejection
        loop {
            let u = DVector::from_fn(n, |_, _| rng.gen_range(-radius..radius));
            if u.norm() <= radius {
                return u;
            }
        }
    };
    for _ in 0..n_pairs {
        let t1 = s + draw(&mut rng);
        let t2 = s + draw(&mut rng);
        let lag = (&t1 - &t2).norm();
        if lag < 1e-12 {
            continue;
        }
        let r = model.cov_unchecked(h, &t1, &t2);
        let local = 1.0 - (&d_s * (&t1 - &t2)).norm().powf(model.alpha);
        worst = worst.max((r - local).abs() / lag.powf(model.alpha));
    }
    worst
}

/// Mesh-restricted estimate of the long-range envelope: max |cov| over
/// point pairs farther apart than `delta`.
pub fn q_of_delta(model: &CovarianceModel, h: f64, mesh: &ManifoldMesh, delta: f64) -> f64 {
    let pts = &mesh.points;
    let mut q: f64 = 0.0;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let gap = (&pts[i].position - &pts[j].position).norm();
            if gap > delta && gap > model.support_radius {
                continue; // exactly zero by compact support
            }
            if gap > delta {
                q = q.max(model.cov_unchecked(h, &pts[i].position, &pts[j].position).abs());
            }
        }
    }
    q
}

#[derive(Debug, Clone)]
pub struct AssumptionReport {
    /// Lower ellipticity bound: (min singular value of D0 over samples)^alpha.
    pub c_min_alpha: f64,
    /// Upper ellipticity bound: (max singular value)^alpha.
    pub c_max_alpha: f64,
    /// (delta, Q-hat(delta)) pairs, Q-hat maximized over the probed scales.
    pub q_samples: Vec<(f64, f64)>,
    /// max Q-hat over delta >= 1; the theorem wants this below 1.
    pub eta_margin: f64,
    /// whether Q-hat(delta) (log delta)^{2r/alpha} <= (log delta)^{-beta}.
    pub v_check: bool,
    /// sup of the first-order-expansion defect over probed base points.
    pub expansion_sup: f64,
}

impl AssumptionReport {
    pub fn violated(&self) -> bool {
        self.eta_margin >= 1.0 || !self.v_check
    }
}

pub struct AssumptionParams {
    /// Scales h at which the decay envelope is probed.
    pub h_list: Vec<f64>,
    pub delta_grid: Vec<f64>,
    /// Exponent of the dominating function v(delta) = (log delta)^{-beta}.
    pub beta: f64,
    /// Target spacing of the diagnostic meshes.
    pub mesh_target: f64,
    pub expansion_radius: f64,
    pub n_pairs: usize,
    pub seed: u64,
}

impl Default for AssumptionParams {
    fn default() -> Self {
        AssumptionParams {
            h_list: vec![1.0, 0.5, 0.25],
            delta_grid: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 6.0],
            beta: 1.0,
            mesh_target: 0.05,
            expansion_radius: 0.01,
            n_pairs: 64,
            seed: 7,
        }
    }
}

pub fn assumption_report(
    model: &CovarianceModel,
    m: &ParametrizedManifold,
    p: &AssumptionParams,
) -> Result<AssumptionReport> {
    if p.h_list.is_empty() || p.delta_grid.is_empty() {
        return Err(Error::InvalidParameter(
            "assumption probe needs nonempty h_list and delta_grid".into(),
        ));
    }
    let sf = model.scaling_field();

    // ellipticity bounds from a singular-value sweep of D0 over M_1
    let unit_mesh = build_mesh(m, 1.0, p.mesh_target.min(m.reach.min(1.0) * 0.2))?;
    let (mut smin, mut smax) = (f64::INFINITY, 0.0f64);
    for pt in &unit_mesh.points {
        let sv = sf.at_unit(&pt.position).svd(false, false).singular_values;
        smin = smin.min(sv.min());
        smax = smax.max(sv.max());
    }

    let meshes: Vec<ManifoldMesh> = p
        .h_list
        .iter()
        .map(|&h| build_mesh(m, h, p.mesh_target.min(m.reach.min(1.0) * 0.2)))
        .collect::<Result<_>>()?;

    let mut q_samples = Vec::with_capacity(p.delta_grid.len());
    for &delta in &p.delta_grid {
        let q = p
            .h_list
            .iter()
            .zip(&meshes)
            .map(|(&h, mesh)| q_of_delta(model, h, mesh, delta))
            .fold(0.0f64, f64::max);
        q_samples.push((delta, q));
    }

    let eta_margin = q_samples
        .iter()
        .filter(|(d, _)| *d >= 1.0)
        .map(|(_, q)| *q)
        .fold(0.0f64, f64::max);

    let two_r_over_alpha = 2.0 * m.intrinsic_dim as f64 / model.alpha;
    let v_check = q_samples.iter().filter(|(d, _)| *d > 1.0).all(|(d, q)| {
        let l = d.ln();
        q * l.powf(two_r_over_alpha) <= l.powf(-p.beta)
    });

    let h0 = p.h_list[0];
    let base_mesh = &meshes[0];
    let stride = (base_mesh.len() / 8).max(1);
    let mut expansion_sup: f64 = 0.0;
    for (k, pt) in base_mesh.points.iter().step_by(stride).enumerate() {
        expansion_sup = expansion_sup.max(local_expansion_error(
            model,
            h0,
            &pt.position,
            p.expansion_radius,
            p.n_pairs,
            p.seed.wrapping_add(k as u64),
        ));
    }

    Ok(AssumptionReport {
        c_min_alpha: smin.powf(model.alpha),
        c_max_alpha: smax.powf(model.alpha),
        q_samples,
        eta_margin,
        v_check,
        expansion_sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_builtin, BuiltinKind};
    use proptest::prelude::*;

    fn pe_unit(alpha: f64) -> CovarianceModel {
        CovarianceModel::powered_exponential(alpha, DMatrix::identity(2, 2)).unwrap()
    }

    #[test]
    fn unit_lag_value() {
        let m = pe_unit(2.0);
        let t1 = DVector::from_vec(vec![0.0, 0.0]);
        let t2 = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(m.cov_unchecked(1.0, &t1, &t1), 1.0);
        assert!((m.cov_unchecked(1.0, &t1, &t2) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn moving_average_compact_support() {
        let m = CovarianceModel::moving_average();
        let at = |tau: f64| {
            m.cov_unchecked(1.0, &DVector::from_vec(vec![0.0]), &DVector::from_vec(vec![tau]))
        };
        assert_eq!(at(0.0), 1.0);
        assert_eq!(at(2.5), 0.0);
        assert_eq!(at(2.0), 0.0);
        assert!(at(1.0) > 0.0);
    }

    #[test]
    fn moving_average_matches_numerical_convolution() {
        // (K*K)(tau) for the Epanechnikov kernel by brute-force quadrature
        let k = |x: f64| if x.abs() <= 1.0 { 0.75 * (1.0 - x * x) } else { 0.0 };
        let conv = |tau: f64| {
            let n = 40_000;
            let (lo, hi) = (-1.0, 1.0);
            let step = (hi - lo) / n as f64;
            (0..=n)
                .map(|i| {
                    let x = lo + i as f64 * step;
                    let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                    w * k(x) * k(x - tau)
                })
                .sum::<f64>()
                * step
        };
        let c0 = conv(0.0);
        for tau in [0.0, 0.3, 0.77, 1.2, 1.9, 2.3] {
            assert!(
                (epanechnikov_autocorrelation(tau) - conv(tau) / c0).abs() < 1e-7,
                "tau={tau}"
            );
        }
    }

    #[test]
    fn moving_average_local_scale() {
        // D^2 = -rho''(0)/2 by central differences; rho carries a |tau|^3
        // term, so Richardson-extrapolate the O(e) error away
        let second = |e: f64| {
            -(epanechnikov_autocorrelation(e) - 2.0 * epanechnikov_autocorrelation(0.0)
                + epanechnikov_autocorrelation(-e))
                / (e * e)
                / 2.0
        };
        let num = 2.0 * second(5e-4) - second(1e-3);
        assert!((num - MOVING_AVERAGE_D_SQUARED).abs() < 1e-5);
    }

    #[test]
    fn deformation_scaling_field_matches_finite_differences() {
        let phi = Deformation::RadialStretch { a: 0.8, b: 0.2 };
        let model = CovarianceModel::space_deformation(1.5, phi).unwrap();
        let sf = model.scaling_field();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let h = rng.gen_range(0.1..1.0);
            let t = DVector::from_fn(2, |_, _| rng.gen_range(-2.0..2.0));
            let d = sf.at_scale(h, &t);
            let x = &t * h;
            let eps = 1e-6;
            for k in 0..2 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += eps;
                xm[k] -= eps;
                let col = (phi.apply(&xp) - phi.apply(&xm)) / (2.0 * eps);
                for i in 0..2 {
                    assert!((col[i] - d[(i, k)]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn expansion_error_small_and_shrinking() {
        let m = pe_unit(2.0);
        let s = DVector::from_vec(vec![0.3, -0.2]);
        let e1 = local_expansion_error(&m, 0.5, &s, 0.01, 200, 42);
        assert!(e1 <= 1e-3, "expansion error {e1}");
        let e2 = local_expansion_error(&m, 0.5, &s, 0.005, 200, 42);
        assert!(e1 >= 1.9 * e2, "halving radius: {e1} vs {e2}");

        // identity deformation reduces to the powered exponential
        let id = CovarianceModel::space_deformation(2.0, Deformation::Identity).unwrap();
        assert!(local_expansion_error(&id, 0.5, &s, 0.01, 200, 42) <= 1e-3);
    }

    #[test]
    fn q_of_delta_examples() {
        let circle = make_builtin(BuiltinKind::Circle { radius: 1.0 }).unwrap();
        let mesh = build_mesh(&circle, 0.25, 0.1).unwrap();
        let pe = pe_unit(2.0);
        let q3 = q_of_delta(&pe, 0.25, &mesh, 3.0);
        assert!(q3 <= (-9.0f64).exp() + 1e-12);
        let q4 = q_of_delta(&pe, 0.25, &mesh, 4.0);
        assert!(q4 <= q3);

        let seg = make_builtin(BuiltinKind::Segment { length: 10.0 }).unwrap();
        let seg_mesh = build_mesh(&seg, 1.0, 0.1).unwrap();
        let ma = CovarianceModel::moving_average();
        assert_eq!(q_of_delta(&ma, 1.0, &seg_mesh, 2.5), 0.0);
    }

    #[test]
    fn domain_guard() {
        let circle = make_builtin(BuiltinKind::Circle { radius: 1.0 }).unwrap();
        let boxed = pe_unit(2.0).with_domain(unit_scale_bounding_box(&circle).unwrap());
        let h = 0.25;
        let on = DVector::from_vec(vec![4.0, 0.0]); // h*on = (1,0) on M_1
        let off = DVector::from_vec(vec![40.0, 0.0]);
        assert!(boxed.cov(h, &on, &on).is_ok());
        assert!(matches!(boxed.cov(h, &on, &off), Err(Error::OutsideDomain(_))));
    }

    #[test]
    fn report_constant_isotropic_scaling() {
        let circle = make_builtin(BuiltinKind::Circle { radius: 1.0 }).unwrap();
        let model =
            CovarianceModel::powered_exponential(2.0, DMatrix::identity(2, 2) * 2.0).unwrap();
        let rep = assumption_report(&model, &circle, &AssumptionParams::default()).unwrap();
        assert!((rep.c_min_alpha - 4.0).abs() < 1e-10);
        assert!((rep.c_max_alpha - 4.0).abs() < 1e-10);
        assert!(!rep.violated());
    }

    #[test]
    fn report_moving_average_vanishing_envelope() {
        let seg = make_builtin(BuiltinKind::Segment { length: 10.0 }).unwrap();
        let model = CovarianceModel::moving_average();
        let p = AssumptionParams {
            delta_grid: vec![2.5, 3.0, 4.0],
            ..AssumptionParams::default()
        };
        let rep = assumption_report(&model, &seg, &p).unwrap();
        assert_eq!(rep.eta_margin, 0.0);
        assert!(rep.v_check);
        for (_, q) in &rep.q_samples {
            assert_eq!(*q, 0.0);
        }
    }

    #[test]
    fn report_deformation_singular_values() {
        // radial stretch on the unit circle: Jphi singular values at |x|=1
        // are a+3b (radial) and a+b (tangential)
        let circle = make_builtin(BuiltinKind::Circle { radius: 1.0 }).unwrap();
        let (a, b) = (0.7, 0.1);
        let model =
            CovarianceModel::space_deformation(1.0, Deformation::RadialStretch { a, b }).unwrap();
        let rep = assumption_report(&model, &circle, &AssumptionParams::default()).unwrap();
        assert!((rep.c_min_alpha - (a + b)).abs() / (a + b) < 0.01);
        assert!((rep.c_max_alpha - (a + 3.0 * b)).abs() / (a + 3.0 * b) < 0.01);
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(CovarianceModel::powered_exponential(3.0, DMatrix::identity(2, 2)).is_err());
        assert!(CovarianceModel::powered_exponential(2.0, DMatrix::zeros(2, 2)).is_err());
        assert!(CovarianceModel::powered_exponential(2.0, DMatrix::identity(2, 3)).is_err());
    }

    proptest! {
        #[test]
        fn cov_symmetric_bounded(
            alpha in 0.2f64..=2.0,
            x1 in -3.0f64..3.0, y1 in -3.0f64..3.0,
            x2 in -3.0f64..3.0, y2 in -3.0f64..3.0,
            h in 0.05f64..1.0,
        ) {
            let models = [
                pe_unit(alpha),
                CovarianceModel::space_deformation(
                    alpha, Deformation::RadialStretch { a: 0.5, b: 0.2 }).unwrap(),
            ];
            let t1 = DVector::from_vec(vec![x1, y1]);
            let t2 = DVector::from_vec(vec![x2, y2]);
            for m in &models {
                let c12 = m.cov_unchecked(h, &t1, &t2);
                let c21 = m.cov_unchecked(h, &t2, &t1);
                prop_assert_eq!(c12, c21);
                prop_assert!(c12.abs() <= 1.0);
                prop_assert_eq!(m.cov_unchecked(h, &t1, &t1), 1.0);
            }
        }
    }
}
