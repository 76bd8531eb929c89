use thiserror::Error;

/// Errors raised by the signal-processing modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid frame spec: {0}")]
    InvalidSpec(String),
    #[error("empty signal")]
    EmptySignal,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("singular covariance at bin {bin}; retry with diagonal loading")]
    Singular { bin: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("signal too short: {0}")]
    TooShort(String),
    #[error("silent {0}")]
    Silent(&'static str),
    #[error("position outside room: {0}")]
    OutsideRoom(String),
    #[error(transparent)]
    Store(#[from] crate::model_store::StoreError),
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
