use std::fmt;
use std::path::Path;
use std::process::ExitCode;

use shortar::Error;

/// A failure with its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad input: exit 2.
    Usage(String),
    /// Missing or unreadable calibration table: exit 3.
    Table(String),
    /// Numerical failure during computation: exit 4.
    Numerical(String),
    /// Anything else (I/O): exit 1.
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Other(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Table(_) => 3,
            CliError::Numerical(_) => 4,
        })
    }

    /// Attaches the table path to table-loading errors.
    pub fn from_table(path: &Path, err: Error) -> Self {
        match err {
            Error::MissingTable(p) => CliError::Table(format!(
                "calibration table not found: {} (generate it with `shortar calibrate`)",
                p.display()
            )),
            Error::Io(e) => CliError::Table(format!("{}: {e}", path.display())),
            e @ (Error::Checksum { .. }
            | Error::Truncated(_)
            | Error::TableVersion { .. }
            | Error::TableParse { .. }
            | Error::Mismatch(_)) => CliError::Table(format!("{}: {e}", path.display())),
            other => other.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let msg = err.to_string();
        match err {
            Error::Order(_) | Error::Config(_) => CliError::Usage(msg),
            Error::MissingTable(_)
            | Error::Checksum { .. }
            | Error::Truncated(_)
            | Error::TableVersion { .. }
            | Error::TableParse { .. } => CliError::Table(msg),
            Error::Io(_) => CliError::Other(msg),
            _ => CliError::Numerical(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Other(err.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        CliError::Other(err.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Table(m) | CliError::Numerical(m) | CliError::Other(m) => {
                f.write_str(m)
            }
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;
