use thiserror::Error;

/// Errors raised by the detection library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Arguments are individually valid but inconsistent with each other.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The fixed-size search exceeded its hard cap.
    #[error("infeasible at this snr: required sample size exceeds the cap of {cap}")]
    Infeasible { cap: u64 },

    /// A root-finding bracket contains no sign change.
    #[error("no root: {0}")]
    NoRoot(String),

    /// The expected LLR increment is zero, so the Wald ASN is undefined.
    #[error("singular ASN: expected LLR increment is zero")]
    SingularAsn,

    /// The increment stream ended before any boundary was crossed.
    #[error("increment stream exhausted after {0} samples without a decision")]
    StreamExhausted(u64),

    /// Zero energy in the reference channel.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The drift points away from the remaining boundary.
    #[error("prediction undefined: {0}")]
    PredictionUndefined(String),

    /// Monte Carlo estimation produced no usable trial.
    #[error("estimation failed: {0}")]
    EstimationFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
