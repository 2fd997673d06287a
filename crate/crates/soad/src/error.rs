use thiserror::Error;

/// Errors produced by the assimilation library.
#[derive(Debug, Error)]
pub enum SoadError {
    /// A scalar argument fell outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Array shapes or layouts do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Invalid caller-supplied data (non-finite values, empty datasets, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// Inconsistent or impossible configuration.
    #[error("invalid config: {0}")]
    Config(String),

    /// A numerical operation failed (singular system, non-finite result).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The reverse-time sampler produced a non-finite state.
    #[error("sampler diverged at t = {t:.6} (reverse step {step})")]
    Divergence { t: f64, step: usize },

    /// Training produced a non-finite loss.
    #[error("training diverged at step {step}: loss = {loss}")]
    TrainingDivergence { step: usize, loss: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A persisted container is malformed or has an unsupported version.
    #[error("file format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, SoadError>;
