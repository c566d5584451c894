use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Caller violated an operation precondition (wrong space tag, bad parameter, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// Vorticity with a nonzero mean has no periodic velocity potential.
    #[error("vorticity has nonzero mean (|w(0)| = {0:e}); no periodic Biot-Savart inverse")]
    NonzeroMean(f64),

    /// A normalization the diagnostics depend on is undefined (e.g. zero initial energy).
    #[error("undefined normalization: {0}")]
    Undefined(String),

    /// Time integration produced non-finite values or crossed the configured norm ceiling.
    #[error("blowup detected at t = {t}: {reason}")]
    BlowupDetected { t: f64, reason: String },
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}
