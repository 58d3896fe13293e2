//! Library side of the `satprobe` command-line tool.
//!
//! Every command reads one [`ExperimentConfig`] and writes its outputs under
//! the configured output directory.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use satprobe_core::datasets::DatasetError;
use satprobe_core::eval::EvalError;
use satprobe_core::features::FeatureError;
use satprobe_core::pipeline::PipelineError;
use satprobe_core::probes::ProbeError;
use satprobe_core::tinylm::ModelError;
use satprobe_core::trace::TraceError;

pub use commands::{run, Command, RunOptions};
pub use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Probe(#[from] ProbeError),
}

fn model_code(e: &ModelError) -> u8 {
    match e {
        ModelError::Io { .. } | ModelError::Format(_) => 2,
        ModelError::Trace(t) => trace_code(t),
        _ => 1,
    }
}

fn trace_code(e: &TraceError) -> u8 {
    match e {
        TraceError::Io { .. } => 2,
        _ => 1,
    }
}

fn dataset_code(e: &DatasetError) -> u8 {
    match e {
        DatasetError::Io { .. } | DatasetError::Parse { .. } => 2,
        _ => 1,
    }
}

impl CliError {
    /// 1 for validation and metric failures, 2 for I/O and configuration problems.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Trace(e) => trace_code(e),
            CliError::Model(e) => model_code(e),
            CliError::Dataset(e) => dataset_code(e),
            CliError::Pipeline(PipelineError::Model(e)) => model_code(e),
            CliError::Pipeline(PipelineError::Dataset(e)) => dataset_code(e),
            CliError::Pipeline(PipelineError::Trace(e)) => trace_code(e),
            CliError::Probe(ProbeError::File { .. }) => 2,
            _ => 1,
        }
    }
}
