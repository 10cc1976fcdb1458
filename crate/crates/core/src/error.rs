use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("framing error: {0}")]
    Framing(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("signal too short for estimation: need {needed} samples, got {got}")]
    InsufficientLength { needed: usize, got: usize },

    #[error("frequency offset search range {requested_hz} Hz exceeds unambiguous range {limit_hz} Hz")]
    FrequencyRange { requested_hz: f64, limit_hz: f64 },

    #[error("equalizer adaptation failed on output {output} at symbol {symbol}: tap energy {tap_energy:.3e}")]
    AdaptationFailure {
        output: usize,
        symbol: usize,
        tap_energy: f64,
    },

    #[error("no PRBS lock: correlation peak {peak_sigma:.2} sigma below threshold {threshold_sigma:.2} sigma")]
    NoLock {
        peak_sigma: f64,
        threshold_sigma: f64,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
