use thiserror::Error;

/// Errors raised by the channel model, the allocator and the validators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("collinear channels (rho = {rho:e}); zero-forcing directions are undefined")]
    CollinearChannels { rho: f64 },

    #[error("{strategy} is only defined for t in {interval}, got t = {t}")]
    Domain { strategy: String, interval: String, t: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;
