use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point outside domain: {0}")]
    OutsideDomain(String),

    #[error("mesh spacing too small: {needed} points required, cap is {cap}")]
    SpacingTooSmall { needed: usize, cap: usize },

    #[error("jacobian is rank-deficient (condition number {0:.3e})")]
    RankDeficient(f64),

    #[error("covariance not positive definite after jitter up to {max_jitter:.1e}")]
    NotPositiveDefinite { max_jitter: f64 },

    #[error("quadrature did not converge: relative change {0:.3e} between refinements")]
    QuadratureNotConverged(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
