use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("discount factor must lie in [0, 1), got {0}")]
    DiscountOutOfRange(f64),

    #[error("confidence parameter must lie in (0, 1), got {0}")]
    DeltaOutOfRange(f64),

    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("MDP file {path}: line {line}: {message}")]
    MdpFile {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown environment generator `{0}`")]
    UnknownGenerator(String),

    #[error("stationary policy enumeration needs {needed} policies, cap is {cap}")]
    EnumerationBudget { needed: f64, cap: usize },

    #[error("inputs are not {epsilon}-close: {reason}")]
    NotClose { epsilon: f64, reason: String },

    #[error("{context} {}: {source}", path.display())]
    Io {
        context: &'static str,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
