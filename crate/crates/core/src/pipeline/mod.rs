//! Staged pipeline: configuration, validation and execution with
//! reproducible, digest-audited run directories.

mod config;
mod run;

use thiserror::Error;

pub use config::{
    BandpowerConfig, CoherenceConfig, CvChoice, ElectrodeChoice, FeaturesConfig, InputConfig,
    PipelineConfig, PreprocessConfig, Stage, TrainConfig, WaveletConfig,
};
pub use run::{
    describe_plan, run, sha256_hex, write_atomic, ClassifierSummary, FileDigest, RegressionSummary,
    RunSummary, SUMMARY_FILE,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("stage {stage} requires stage {missing}, which is not requested")]
    Dependency { stage: Stage, missing: Stage },
    #[error("stage {stage} failed: {message}")]
    Stage { stage: Stage, message: String },
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// The stage a failure is attributed to, if any.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Self::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;
