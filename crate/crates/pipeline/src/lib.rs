//! Dataset ingestion and synthesis, batch enhancement, and the two-arm
//! experiment that trains the same seeded network on raw and on
//! CLAHE-enhanced copies of one dataset split.

pub mod config;
pub mod dataset;
pub mod experiment;
pub mod preprocess;
pub mod synth;

pub use config::{DatasetSource, ExperimentConfig, TrainSettings};
pub use dataset::{
    ingest_directory, split_dataset, ClassLabel, DatasetManifest, Provenance, Sample, SampleSource,
    Split,
};
pub use experiment::{run_experiment, ExperimentOutcome};
pub use preprocess::preprocess_batch;
pub use synth::{generate_synthetic_dataset, synthesize_image, SynthParams};

use thiserror::Error;

/// Pipeline failures, split by the exit code they map to: 1 for usage,
/// 2 for data problems, 3 for training divergence.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("training diverged in the {arm} arm at epoch {epoch}")]
    Divergence { arm: String, epoch: usize },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) => 1,
            PipelineError::Data(_) => 2,
            PipelineError::Divergence { .. } => 3,
        }
    }

    pub fn data(err: impl std::fmt::Display) -> Self {
        PipelineError::Data(err.to_string())
    }
}
