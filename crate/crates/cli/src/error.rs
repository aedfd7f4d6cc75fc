use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("missing input file {}", .0.display())]
    MissingInput(PathBuf),
    #[error("{}: {msg}", path.display())]
    Input { path: PathBuf, msg: String },
    #[error("{0}")]
    Compute(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn input(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Input {
            path: path.to_path_buf(),
            msg: e.to_string(),
        }
    }

    pub fn compute(e: impl std::fmt::Display) -> Self {
        CliError::Compute(e.to_string())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::MissingInput(_) => "missing_input",
            CliError::Input { .. } => "invalid_input",
            CliError::Compute(_) => "compute",
            CliError::Io { .. } => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::MissingInput(_) | CliError::Input { .. } => 3,
            CliError::Compute(_) | CliError::Io { .. } => 1,
        }
    }

    pub fn record(&self, command: Option<&str>) -> ErrorRecord {
        ErrorRecord {
            status: "error",
            kind: self.kind(),
            command: command.map(str::to_string),
            message: self.to_string(),
            path: match self {
                CliError::MissingInput(p)
                | CliError::Input { path: p, .. }
                | CliError::Io { path: p, .. } => Some(p.display().to_string()),
                _ => None,
            },
        }
    }
}

/// The JSON line printed on stderr when a command fails.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub status: &'static str,
    pub kind: &'static str,
    pub command: Option<String>,
    pub message: String,
    pub path: Option<String>,
}
