use thiserror::Error;

/// Errors raised by the simulator, the learning agents and the experiment harness.
#[derive(Debug, Error)]
pub enum QrlError {
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("invalid qubit index {index} for a {n_qubits}-qubit register")]
    InvalidQubit { index: usize, n_qubits: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("environment error: {0}")]
    Environment(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("checkpoint format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, QrlError>;
