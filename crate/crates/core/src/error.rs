use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A function was evaluated outside the set where it is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// Model parameters violate one or more structural constraints.
    #[error("invalid parameters: {}", .0.join("; "))]
    Validation(Vec<String>),
    /// A configuration value is missing, malformed or inconsistent.
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },
    /// The requested discretization is not monotone.
    #[error("scheme is not monotone: {0}")]
    NonMonotone(String),
    /// An iterative method stopped before reaching its tolerance.
    #[error("no convergence: {0}")]
    NoConvergence(String),
    /// The request is outside what the implementation supports.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// The input is not a feasible point of the problem.
    #[error("infeasible input: {0}")]
    Infeasible(String),
    #[error("malformed file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
