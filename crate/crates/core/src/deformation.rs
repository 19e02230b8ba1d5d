//! Smooth diffeomorphism presets used both as covariance-space deformations
//! and to build deformed manifolds.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A smooth map of the ambient space with an analytic Jacobian.
///
/// `RadialStretch` is `x -> x * (a + b * |x|^2)`; it maps circles centred at
/// the origin to circles, which keeps reach and volume of deformed built-ins
/// analytic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Deformation {
    Identity,
    RadialStretch { a: f64, b: f64 },
}

impl Deformation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Deformation::Identity => Ok(()),
            Deformation::RadialStretch { a, b } => {
                if a <= 0.0 || b < 0.0 || !a.is_finite() || !b.is_finite() {
                    Err(Error::InvalidParameter(format!(
                        "radial_stretch requires a > 0 and b >= 0, got a={a}, b={b}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match *self {
            Deformation::Identity => x.clone(),
            Deformation::RadialStretch { a, b } => x * (a + b * x.norm_squared()),
        }
    }

    /// Jacobian at `x`: for the radial stretch this is
    /// `(a + b|x|^2) I + 2b x x^T`.
    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = x.len();
        match *self {
            Deformation::Identity => DMatrix::identity(n, n),
            Deformation::RadialStretch { a, b } => {
                let mut j = DMatrix::identity(n, n) * (a + b * x.norm_squared());
                j += 2.0 * b * x * x.transpose();
                j
            }
        }
    }

    /// Image of the radius of an origin-centred circle under the map.
    pub fn image_radius(&self, rho: f64) -> f64 {
        match *self {
            Deformation::Identity => rho,
            Deformation::RadialStretch { a, b } => rho * (a + b * rho * rho),
        }
    }
}
