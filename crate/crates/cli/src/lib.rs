//! Batch driver: configuration in, modes, reduced model and frequency responses out.

pub mod artifacts;
pub mod config;
pub mod pipeline;

use std::path::PathBuf;

use thiserror::Error;

pub use config::PipelineConfig;
pub use pipeline::{check, run_modes, run_pipeline, RunSummary};

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "DNF_ROM_THREADS";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("stage {stage}: {message}")]
    Numerical { stage: &'static str, message: String },
    #[error("i/o on {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical { .. } => 3,
            Self::Io { .. } => 4,
        }
    }

    pub(crate) fn numerical(stage: &'static str, e: impl std::fmt::Display) -> Self {
        Self::Numerical { stage, message: e.to_string() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }
}
