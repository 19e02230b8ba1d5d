//! Simulation toolkit for extremes of locally stationary Gaussian fields on
//! growing manifolds: manifold meshes, covariance families with checkable
//! local structure, exact Gaussian sampling, Pickands-constant estimation,
//! and the threshold/limit-law formulas tying them together.

pub mod covariance;
pub mod deformation;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod limits;
pub mod pickands;
pub mod sampler;

pub use error::{Error, Result};
