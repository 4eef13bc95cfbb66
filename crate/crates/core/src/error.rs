use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("coefficient is not positive definite: {0}")]
    Coercivity(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Iteration { iterations: usize, residual: f64 },

    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}
