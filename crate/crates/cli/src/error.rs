use std::path::PathBuf;

use augsc::ErrorKind;
use serde_json::json;
use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] augsc::Error),

    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("writing {}: {message}", path.display())]
    Output { path: PathBuf, message: String },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn output(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Output {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Usage(_) => ErrorKind::Usage,
            CliError::Io { .. } | CliError::Output { .. } => ErrorKind::Data,
        }
    }

    /// 1 for usage or configuration errors, 2 for data and IO errors, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Numerical => 3,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind() {
            ErrorKind::Usage => "usage",
            ErrorKind::Data => "data",
            ErrorKind::Numerical => "numerical",
        }
    }

    /// One-line JSON description for scripts driving the CLI.
    pub fn record(&self) -> serde_json::Value {
        json!({
            "error": {
                "kind": self.kind_name(),
                "exit_code": self.exit_code(),
                "message": self.to_string(),
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_kind() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
        assert_eq!(CliError::Core(augsc::Error::Config("x".into())).exit_code(), 1);
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        assert_eq!(CliError::io("a", io).exit_code(), 2);
        assert_eq!(CliError::Core(augsc::Error::NotPositiveDefinite { rows: 2 }).exit_code(), 3);
        let nested = augsc::Error::Iteration {
            iter: 4,
            source: Box::new(augsc::Error::NonFinite("h")),
        };
        assert_eq!(CliError::Core(nested).exit_code(), 3);
    }

    #[test]
    fn record_is_machine_readable() {
        let rec = CliError::Usage("bad flag".into()).record();
        assert_eq!(rec["error"]["kind"], "usage");
        assert_eq!(rec["error"]["exit_code"], 1);
        assert_eq!(rec["error"]["message"], "bad flag");
    }
}
