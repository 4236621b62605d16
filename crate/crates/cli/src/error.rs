use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use tripcraft_core::gateway::BackendError;
use tripcraft_core::ingest::IngestError;
use tripcraft_core::metrics::MetricsError;
use tripcraft_core::orchestrator::RunError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("backend: {0}")]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{0}")]
    Incompatible(String),
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Ingest(_) => "ingest",
            CliError::Backend(_) => "backend",
            CliError::Run(_) => "run",
            CliError::Metrics(_) => "metrics",
            CliError::Incompatible(_) => "incompatible",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            error: &'a str,
            message: String,
        }
        serde_json::to_string(&Out {
            error: self.kind(),
            message: self.to_string(),
        })
        .expect("error serializes")
    }
}
