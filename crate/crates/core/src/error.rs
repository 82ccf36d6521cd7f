use thiserror::Error;

/// Errors raised by the simulation, metrics, sampling and training layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("error model does not fit the pulse sequence: {0}")]
    IncompatibleErrorModel(String),

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("state vector is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("invalid interval [{low}, {high}]: {reason}")]
    InvalidInterval { low: f64, high: f64, reason: &'static str },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("sample set is empty")]
    EmptySampleSet,

    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },

    #[error("virtual control of pulse {pulse} is the zero vector")]
    DegenerateVirtual { pulse: usize },

    #[error("cost became non-finite at iteration {iteration}")]
    NonFiniteCost { iteration: usize },

    #[error("every training group was discarded after round {round}")]
    AllGroupsDiscarded { round: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
