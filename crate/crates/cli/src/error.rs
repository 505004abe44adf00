use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failures surfaced by the command-line tool, each mapped to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },

    /// `row` is the 1-based line number in the file.
    #[error("{}: line {row}: {message}", path.display())]
    Parse { path: PathBuf, row: u64, message: String },

    #[error(transparent)]
    Core(#[from] isspc_core::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

impl CliError {
    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.to_path_buf(), message: err.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        use isspc_core::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io { .. } | CliError::Parse { .. } => EXIT_IO,
            CliError::Internal(_) => EXIT_INTERNAL,
            CliError::Core(e) => match e {
                E::Config(_) | E::InfeasibleSpec(_) | E::Domain(_) => EXIT_CONFIG,
                E::InvalidData(_) | E::DegenerateInput(_) | E::DimensionMismatch { .. } => EXIT_IO,
                E::PathExhausted(_) => EXIT_INTERNAL,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::io(Path::new("a.csv"), "missing").exit_code(), 3);
        assert_eq!(CliError::Core(isspc_core::Error::InfeasibleSpec("x".into())).exit_code(), 2);
        assert_eq!(CliError::Core(isspc_core::Error::InvalidData("x".into())).exit_code(), 3);
        assert_eq!(CliError::Internal("x".into()).exit_code(), 4);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let e = CliError::Parse { path: "d.csv".into(), row: 7, message: "bad".into() };
        assert_eq!(e.to_string(), "d.csv: line 7: bad");
    }
}
