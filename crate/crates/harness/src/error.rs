use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// `line` is 0 when the problem is not tied to one line.
    #[error("{}", config_message(*line, message))]
    Config { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] qcp_core::QcpError),
    #[error("{} run(s) failed: {}", failed.len(), failed.join("; "))]
    Runs { failed: Vec<String> },
}

fn config_message(line: usize, message: &str) -> String {
    if line == 0 {
        format!("config error: {message}")
    } else {
        format!("config error at line {line}: {message}")
    }
}

impl HarnessError {
    pub fn config(line: usize, message: impl Into<String>) -> Self {
        Self::Config {
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for configuration problems, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } => 1,
            _ => 2,
        }
    }
}
