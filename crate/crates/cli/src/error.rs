use std::path::{Path, PathBuf};

use thiserror::Error;

pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_USAGE: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{stage}: infeasible: {detail}{}", partial_note(.written))]
    Infeasible { stage: String, detail: String, written: Vec<PathBuf> },
    #[error("{stage}: numerical failure: {detail}{}", partial_note(.written))]
    Numerical { stage: String, detail: String, written: Vec<PathBuf> },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{stage}: {detail}")]
    Internal { stage: String, detail: String },
}

fn partial_note(written: &[PathBuf]) -> String {
    if written.is_empty() {
        String::new()
    } else {
        let list: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
        format!(" (partial output: {})", list.join(", "))
    }
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn infeasible(stage: &str, detail: impl ToString) -> Self {
        CliError::Infeasible { stage: stage.into(), detail: detail.to_string(), written: Vec::new() }
    }

    pub fn numerical(stage: &str, detail: impl ToString) -> Self {
        CliError::Numerical { stage: stage.into(), detail: detail.to_string(), written: Vec::new() }
    }

    pub fn internal(stage: &str, detail: impl ToString) -> Self {
        CliError::Internal { stage: stage.into(), detail: detail.to_string() }
    }

    /// Attach the files written before the failure.
    pub fn with_written(self, files: &[PathBuf]) -> Self {
        match self {
            CliError::Infeasible { stage, detail, .. } => CliError::Infeasible { stage, detail, written: files.to_vec() },
            CliError::Numerical { stage, detail, .. } => CliError::Numerical { stage, detail, written: files.to_vec() },
            other => other,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Infeasible { .. } => EXIT_INFEASIBLE,
            CliError::Numerical { .. } => EXIT_NUMERICAL,
            CliError::Io { .. } | CliError::Internal { .. } => 1,
        }
    }
}
