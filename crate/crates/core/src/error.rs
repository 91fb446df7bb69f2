use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand dimensions are incompatible or a matrix is not square/symmetric.
    #[error("shape error: {0}")]
    Shape(String),

    /// An iterative eigensolver hit its iteration cap.
    #[error("eigensolver did not converge within {0} iterations")]
    Convergence(usize),

    /// A matrix that must be positive definite is not.
    #[error("matrix is not positive definite: {0}")]
    Definiteness(String),

    /// A scalar or list argument is out of its documented range.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// An input is in the wrong state (e.g. uncentered data).
    #[error("invalid state: {0}")]
    State(String),

    /// A factor matrix is singular or rank deficient.
    #[error("rank deficient: {0}")]
    Rank(String),

    /// A text file failed to parse.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// True for errors caused by bad input data rather than bad usage.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Argument(_))
    }
}
