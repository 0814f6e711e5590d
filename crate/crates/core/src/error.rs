//! Error taxonomy shared by the whole engine.
//!
//! The CLI maps these onto exit codes: scene/JSON problems are parse errors
//! (exit 3), failed mathematical checks are validation errors (exit 1), and
//! everything that goes wrong mid-computation is a numerical error (exit 2).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid Lie algebra: {0}")]
    InvalidAlgebra(String),

    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    #[error("strong convexity failure: fundamental tensor not positive definite at y = {y:?}")]
    StrongConvexity { y: Vec<f64> },

    #[error("norm admissibility violated: {0}")]
    InadmissibleNorm(String),

    #[error("degenerate flag: g_y-area of (y, w) below 1e-12")]
    DegenerateFlag,

    #[error("trajectory left the slit cone at t = {t} (|y| = {norm:.3e})")]
    ConeExit { t: f64, norm: f64 },

    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    #[error("chart radius exceeded: |x| = {norm:.3e} > {radius:.3e}")]
    ChartRadiusExceeded { norm: f64, radius: f64 },

    #[error("finite-difference step collapsed near the cone tip at y = {y:?}")]
    StepCollapse { y: Vec<f64> },

    #[error("series did not converge within {max_terms} terms")]
    SeriesDivergence { max_terms: usize },

    #[error("curve sample interpolation outside domain: t = {t}, domain [{lo}, {hi}]")]
    OutsideDomain { t: f64, lo: f64, hi: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("scene error at {location}: {message}")]
    Scene { location: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn scene(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Scene {
            location: location.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
