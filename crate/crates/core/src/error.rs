use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Caller broke a documented precondition or passed a bad configuration.
    Usage,
    /// Input data could not be read or is malformed.
    Data,
    /// A numerical routine failed on well-formed input.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{op} did not converge on a {rows}x{cols} matrix")]
    NoConvergence {
        op: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("singular Sylvester equation: alpha[{i}] + beta[{j}] = {alpha:e} + {beta:e} is numerically zero")]
    SingularSylvester {
        i: usize,
        j: usize,
        alpha: f64,
        beta: f64,
    },

    #[error("{rows}x{rows} matrix is not positive definite")]
    NotPositiveDefinite { rows: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("solver failed at iteration {iter}: {source}")]
    Iteration {
        iter: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}{}: {message}", line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Parse {
        context: String,
        line: Option<usize>,
        message: String,
    },

    #[error("view `{view}`: {message}")]
    View { view: String, message: String },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Contract(_) | Error::Config(_) => ErrorKind::Usage,
            Error::Io { .. } | Error::Parse { .. } | Error::View { .. } => ErrorKind::Data,
            Error::NoConvergence { .. }
            | Error::SingularSylvester { .. }
            | Error::NotPositiveDefinite { .. }
            | Error::NonFinite(_) => ErrorKind::Numerical,
            Error::Iteration { source, .. } => source.kind(),
        }
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn parse(context: impl Into<String>, line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            line,
            message: message.into(),
        }
    }
}
