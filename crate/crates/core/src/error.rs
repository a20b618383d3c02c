use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("axis {axis} out of range for {n} oscillators")]
    AxisOutOfRange { axis: usize, n: usize },

    #[error("level {level} above fiber cutoff {cutoff}")]
    LevelAboveCutoff { level: usize, cutoff: usize },

    #[error("fiber cutoff {cutoff} too small: need at least {required}")]
    InsufficientCutoff { cutoff: usize, required: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not in u({n}): {reason}")]
    NotUnitaryAlgebra { n: usize, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("heat coefficient a4 requires the bundle curvature, which is not available for {0}")]
    MissingBundleCurvature(String),

    #[error("expansion order {order} exceeds the Bernoulli table (max {max})")]
    OrderBeyondBernoulli { order: usize, max: usize },

    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),

    #[error("mesh is disconnected: vertex {0} unreachable")]
    Disconnected(usize),

    #[error("section is not supported on level 0 (residual {0:e})")]
    NotLevelZero(f64),

    #[error("config error: {0}")]
    Config(String),
}
