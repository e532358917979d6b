//! Configuration-driven runs: stages execute in the declared order over one
//! document set, each leaving its output and a balanced report on disk.
//!
//! Completed stages and per-document model outcomes go to a ledger in the
//! output directory, so an interrupted run picks up where it stopped and a
//! finished run is not repeated.

mod config;
mod models;
mod run;

use std::path::PathBuf;

pub use config::{
    BenchgenStage, ClassifyStage, DecontamStage, LabelerSpec, LanguageMode, LocalQueueConfig, ModelSpec,
    ModelsConfig, PipelineConfig, PortraitStage, RulesStage, StageSpec,
};
pub use models::{chat_model, labeler, IdentityTeacher, Models};
pub use run::{FinalCounts, Pipeline, RunSummary, StageSummary, LEDGER_FILE, RESOLVED_CONFIG_FILE};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("cannot read {0}: {1}")]
    Io(PathBuf, String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("model backend {0}: {1}")]
    Model(PathBuf, String),
    #[error("{0} holds a run with a different config; use a fresh output_dir")]
    Changed(PathBuf),
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("io: {0}")]
    Io(String),
    #[error("stage {stage}: {msg}")]
    Stage { stage: String, msg: String },
    #[error(transparent)]
    Ledger(#[from] crate::ledger::LedgerError),
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}
