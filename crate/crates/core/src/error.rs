use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("weights must sum to 1 (sum = {sum})")]
    NonPositiveWeightSum { sum: f64 },

    #[error("configuration has no points")]
    EmptyConfiguration,

    #[error("pair ({i}, {j}) expands: distance ratio {ratio}")]
    NotAContraction { i: usize, j: usize, ratio: f64 },

    #[error("source points {i} and {j} coincide but their images differ")]
    InconsistentCollapse { i: usize, j: usize },

    #[error("exact expansion needs {terms} terms, budget is {budget}")]
    BudgetExceeded { terms: u128, budget: u128 },

    #[error("quadrature supports dimension <= 2, got {0}")]
    UnsupportedDimension(usize),

    #[error("order must be positive, got {0}")]
    NonPositiveAlpha(f64),

    #[error("covariance is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("point is not in the relative interior of the convex hull (max-min barycentric weight {margin})")]
    NotInRelativeInterior { margin: f64 },

    #[error("linear feasibility problem has no solution: {0}")]
    Infeasible(String),

    #[error("intrinsic bandwidth s0 > 0 is required")]
    BandwidthRequired,

    #[error("operator norm {norm} exceeds 1")]
    OperatorNormExceeded { norm: f64 },

    #[error("grid is not uniform")]
    NonUniformGrid,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
