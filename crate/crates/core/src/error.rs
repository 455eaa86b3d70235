use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The air gap closed (z <= 0).
    #[error("gap collapse: z = {z} m")]
    GapCollapse { z: f64 },

    /// A state or intermediate value became non-finite.
    #[error("divergence at step {step}")]
    Divergence { step: usize },

    /// Ziegler-Nichols identification found no marginal-stability crossing.
    #[error("not tunable: {0}")]
    NotTunable(String),

    /// Malformed configuration (membership functions, rule bases, gains).
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
