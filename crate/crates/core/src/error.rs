use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("weight list is empty")]
    EmptyWeights,
    #[error("weight {index} is negative or not finite ({value})")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weights sum to zero")]
    ZeroMass,
    #[error("variable or partition is not defined on this probability space")]
    SpaceMismatch,
    #[error("outcome counts differ: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("value at outcome {index} is not finite")]
    NonFiniteValue { index: usize },
    #[error("information menu is empty")]
    EmptyMenu,
    #[error("invalid information menu: {0}")]
    InvalidMenu(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("expected {expected} weights, got {got}")]
    WeightMismatch { expected: usize, got: usize },
    #[error("invalid aggregator weights: {0}")]
    InvalidWeights(String),
    #[error("invalid aggregator specification: {0}")]
    InvalidSpec(String),
    #[error("empty prediction vector")]
    EmptyInput,
    #[error("covariance matrix is singular or ill-conditioned (condition number {condition:e})")]
    SingularCovariance { condition: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-triviality violated: {0}")]
    NonTriviality(String),
    #[error("omega {0} coincides with a partition point")]
    BoundaryOmega(f64),
    #[error("omega {omega} falls in a truncated boundary atom at depth {depth}")]
    DepthTooSmall { omega: f64, depth: usize },
    #[error("weight sequence fails the Jamison condition: {0}")]
    JamisonViolation(String),
    #[error("weight sequence has a non-positive entry at position {index}")]
    NonPositiveWeight { index: usize },
}
