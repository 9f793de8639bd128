use thiserror::Error;

/// Errors produced by the environment, learners, advice sources and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed map: {0}")]
    MalformedMap(String),
    #[error("map has no path from start to goal")]
    NoPath,
    #[error("map must contain exactly one start and one goal cell ({0})")]
    MissingStartOrGoal(String),
    #[error("agent state ({x}, {z}) is not on a walkable cell")]
    InvalidState { x: usize, z: usize },
    #[error("input has {actual} features, network expects {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("training loss is not finite")]
    NonFiniteLoss,
    #[error("loss must be non-negative, got {0}")]
    NegativeLoss(f64),
    #[error("state ({x}, {z}, {facing}) is not in the oracle table")]
    UnknownState { x: usize, z: usize, facing: char },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
