use thiserror::Error;

/// Failure modes shared by every computation in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A series or quadrature could not reach its accuracy target.
    #[error("accuracy error in {context}: error estimate {estimate:e}")]
    Accuracy { context: String, estimate: f64 },

    /// The discretized model is not well formed (e.g. not positive definite).
    #[error("model error: {0}")]
    Model(String),

    /// The coupled system Hamiltonian is not bounded below.
    #[error("stability error: {0}")]
    Stability(String),

    /// A computed state violates a physical bound it must satisfy.
    #[error("internal consistency error: {0}")]
    Consistency(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn accuracy(context: impl Into<String>, estimate: f64) -> Self {
        Error::Accuracy {
            context: context.into(),
            estimate,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
