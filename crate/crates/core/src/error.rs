use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A point or parameter lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter violates a documented validity range.
    #[error("validation error: {0}")]
    Validation(String),

    /// Evaluation at the centre of a Möbius map.
    #[error("singularity: {0}")]
    Singularity(String),

    #[error("kernel is not normalizable: {0}")]
    NonNormalizable(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a numerical method, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonConvergence { .. } | Error::Quadrature(_))
    }
}
