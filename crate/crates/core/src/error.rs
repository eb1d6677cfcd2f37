use thiserror::Error;

/// Errors surfaced by the training engine.
#[derive(Error, Debug)]
pub enum Error {
    #[error("non-finite value encountered in {layer}")]
    NumericalOverflow { layer: String },

    #[error("node {0} is not a recorded scalar on this tape")]
    InvalidNode(usize),

    #[error("network is already weight-factorized")]
    AlreadyFactorized,

    #[error("shape mismatch: {0}")]
    ShapeError(String),

    #[error("period must be positive, got {0}")]
    InvalidPeriod(f64),

    #[error("chunk losses must be nonnegative and finite, got {0}")]
    InvalidLoss(f64),

    #[error("gradient norm of `{term}` is degenerate ({norm:.3e})")]
    DegenerateGradient { term: String, norm: f64 },

    #[error("NTK trace of `{term}` is degenerate ({trace:.3e})")]
    DegenerateKernel { term: String, trace: f64 },

    #[error("batch is empty")]
    EmptyBatch,

    #[error("characteristic scale must be positive, got {0}")]
    InvalidScale(f64),

    #[error("spectral solver diverged at t={t:.6}: max|u| = {max_abs:.3e}")]
    SolverDiverged { t: f64, max_abs: f64 },

    #[error("reference solution has zero norm")]
    DegenerateReference,

    #[error("batch of {got} exceeds the dense NTK limit of {limit}")]
    BatchTooLarge { got: usize, limit: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("file format error: {0}")]
    FileFormat(String),

    #[error("non-finite gradient at step {step}{}", last_good.as_ref().map(|p| format!(" (last good checkpoint: {p})")).unwrap_or_default())]
    NonFiniteGradient { step: u64, last_good: Option<String> },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
