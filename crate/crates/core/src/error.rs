use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("numerical failure at step {step}: {reason}")]
    Numerical { step: usize, reason: String },
    #[error("degenerate state: {0}")]
    Degenerate(String),
    #[error("normal equations ill-conditioned at reg = {reg:e}; retry with reg >= {suggested:e}")]
    Conditioning { reg: f64, suggested: f64 },
    #[error("t = {0} is not a node of the time grid")]
    NotGridNode(f64),
    #[error("cannot write {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
