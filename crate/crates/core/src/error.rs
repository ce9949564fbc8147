use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("stress has no deviatoric part (sigma_eq = {sigma_eq:e})")]
    DegenerateStress { sigma_eq: f64 },

    #[error("Lode gradient is singular (|sin 3theta| = {sin_3theta:e})")]
    LodeSingular { sin_3theta: f64 },

    #[error("damage is saturated (hD = {hd})")]
    SaturatedDamage { hd: f64 },

    #[error("equivalent plastic strain must be nonnegative, got {0}")]
    NegativeStrain(f64),

    #[error("invalid material parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("local return mapping did not converge after {iterations} iterations (|f| = {residual:e})")]
    ReturnMapNonConvergence { iterations: usize, residual: f64 },

    #[error("mixed control did not converge at step {step}: component {component} off by {error:e} MPa")]
    MixedControlNonConvergence { step: usize, component: usize, error: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid load path: {0}")]
    InvalidPath(String),

    #[error("state is fractured")]
    Fractured,

    #[error("stress state parameter must be positive, got {0}")]
    NonPositiveH(f64),

    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("fit did not converge after {iterations} iterations")]
    FitNonConvergence { iterations: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
