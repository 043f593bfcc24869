use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two objects live on Fock bases of different atom number.
    #[error("basis mismatch: N = {left} vs N = {right}")]
    BasisMismatch { left: usize, right: usize },

    /// A configuration the model deliberately does not cover (odd q, odd N, ...).
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// Sampling or simulation parameters that cannot be honoured.
    #[error("configuration error: {0}")]
    Config(String),

    /// A result failed an internal consistency check (e.g. a complex
    /// expectation value of a Hermitian operator).
    #[error("numerical consistency error: {0}")]
    Consistency(String),

    /// Adaptive quadrature did not reach the requested tolerance.
    #[error(
        "quadrature did not converge on [{lower}, {upper}]: estimate {estimate:e}, error {error:e}"
    )]
    Quadrature {
        lower: f64,
        upper: f64,
        estimate: f64,
        error: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
