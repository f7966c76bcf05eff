use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),

    #[error("invalid receiver config: {0}")]
    InvalidReceiver(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("slope magnitude {slope:.3e} Hz/s below dictionary minimum {min:.3e} Hz/s")]
    SlopeTooSmall { slope: f64, min: f64 },

    #[error("atom window does not overlap the sample interval")]
    EmptyWindow,

    #[error("invalid grid range: {0}")]
    InvalidRange(String),

    #[error("coarse search selected no atoms; nothing to refine")]
    EmptySupport,

    #[error("selected atom columns are rank deficient")]
    RankDeficient,

    #[error("high-pass cutoff {0:.3e} Hz outside (0, f_r)")]
    InvalidCutoff(f64),

    #[error("signal length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("dictionary cache does not match requested grid parameters")]
    CacheMismatch,

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("signal file format error: {0}")]
    SignalFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
