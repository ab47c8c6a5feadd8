use thiserror::Error;

/// Errors raised by the model, solver and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine (quadrature, series, root finding) failed to reach
    /// its tolerance.
    #[error("numerical error in {routine}: {detail}")]
    Numerical {
        routine: &'static str,
        detail: String,
    },

    /// An iterative solver ran out of budget. Carries a human-readable
    /// diagnostic; the best-so-far solution is reported by the solver itself.
    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    /// Configuration failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(routine: &'static str, detail: impl Into<String>) -> Self {
        Error::Numerical {
            routine,
            detail: detail.into(),
        }
    }
}
