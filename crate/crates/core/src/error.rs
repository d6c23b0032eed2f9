use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix family is empty")]
    EmptyFamily,

    #[error("matrix {index} is {rows}x{cols}, expected {dim}x{dim}")]
    DimensionMismatch {
        index: usize,
        rows: usize,
        cols: usize,
        dim: usize,
    },

    #[error("matrix {index} has a non-finite entry at ({row}, {col})")]
    NonFiniteEntry {
        index: usize,
        row: usize,
        col: usize,
    },

    #[error("expected {expected} probabilities, got {got}")]
    ProbabilityCount { expected: usize, got: usize },

    #[error("probability {index} is not strictly positive ({value})")]
    NonPositiveProbability { index: usize, value: f64 },

    #[error("probabilities do not sum to 1 (sum = {sum})")]
    ProbabilitiesNotNormalized { sum: f64 },

    #[error("ensemble too large: {leaves} products of length {k} exceed the cap of {cap}")]
    EnsembleTooLarge { k: usize, leaves: u128, cap: u64 },

    #[error("family is not nonnegative (matrix {index}, entry ({row}, {col}) = {value})")]
    NotNonnegative {
        index: usize,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("Lyapunov radius estimate is -inf at sampled resolution ({trajectories} degenerate trajectories)")]
    AllTrajectoriesDegenerate { trajectories: usize },

    #[error("partition is inconsistent with the family: {0}")]
    PartitionMismatch(String),

    #[error("undecided within budget: more than {budget} product patterns explored")]
    Undecided { budget: usize },

    #[error("optimizer failure: {0}")]
    Optimizer(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
