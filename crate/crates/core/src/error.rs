use thiserror::Error;

/// Errors raised by model construction, spectral tracking, trajectory design
/// and time evolution.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("control value {lambda} is outside the admissible interval [{lo}, {hi}]")]
    OutOfRange { lambda: f64, lo: f64, hi: f64 },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("levels {lower} and {upper} are degenerate at lambda = {lambda}")]
    DegenerateGap { lambda: f64, lower: usize, upper: usize },

    #[error("gap derivative vanishes on [{from}, {to}]; uniform-adiabatic schedule undefined")]
    FlatGap { from: f64, to: f64 },

    #[error("ring root not bracketed in branch {branch}")]
    RootNotBracketed { branch: usize },

    #[error("norm drift {drift:e} exceeds tolerance; step size too coarse")]
    StepSizeTooCoarse { drift: f64 },

    #[error("internal consistency failure: {0}")]
    Consistency(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("trajectory table: {0}")]
    Table(String),
}

pub type Result<T> = std::result::Result<T, Error>;
