use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the estimator, the channel lab and the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-informative posterior: posterior variance {post} is not below prior variance {pri}")]
    NonInformativePosterior { post: f64, pri: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numeric guard: {0}")]
    Numeric(String),

    #[error("non-finite value at turbo iteration {iteration}: {what}")]
    NonFinite { iteration: usize, what: String },

    #[error("SE map undefined at step {step}: denominator {denominator}")]
    SeUndefined { step: usize, denominator: f64 },

    #[error("NMSE undefined for an all-zero reference channel")]
    ZeroTruth,

    #[error("unnormalizable message from factor `{factor}`")]
    Unnormalizable { factor: String },

    #[error("unsupported graph: {0}")]
    Unsupported(String),

    #[error("not a channel file: {0}")]
    BadMagic(PathBuf),

    #[error("unexpected end of file while reading {0}")]
    UnexpectedEof(PathBuf),

    #[error("channel file {path}: {reason}")]
    BadChannelFile { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
