use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The integrated state became non-finite.
    #[error("integration diverged at t = {t:e} s (non-finite state)")]
    Divergence { t: f64 },

    /// Envelope still drifting at the end of a settle/measure run.
    #[error("response not settled: envelope drift {drift:.3e} over the last {cycles} cycles")]
    NotSettled { drift: f64, cycles: usize },

    #[error("near-degenerate linear system (condition number {condition:.3e})")]
    NearDegenerate { condition: f64 },

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {value}")))
    }
}
