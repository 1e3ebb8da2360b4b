use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid interval: lower bound {lower} must be below upper bound {upper}")]
    InvalidInterval { lower: f64, upper: f64 },
    #[error("invalid spline degree {0}: must be at least 1")]
    InvalidDegree(usize),
    #[error("interior knots must be strictly increasing and inside ({lower}, {upper})")]
    InvalidKnots { lower: f64, upper: f64 },
    #[error("value {x} lies outside the domain [{lower}, {upper}]")]
    OutOfDomain { x: f64, lower: f64, upper: f64 },
    #[error("covariate column {column} is constant")]
    ConstantColumn { column: usize },
    #[error("group {group} has zero numerical rank after centering")]
    SingularGroup { group: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite objective: an excluded group carries nonzero coefficients")]
    NonFiniteObjective,
    #[error("every group is excluded by an infinite weight")]
    AllGroupsExcluded,
    #[error("residual sum of squares must be positive, got {0}")]
    NonPositiveRss(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("fold too small: n = {n} cannot be split into {k} folds of at least 2 observations")]
    FoldTooSmall { n: usize, k: usize },
    #[error("invalid data: {0}")]
    InvalidData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
