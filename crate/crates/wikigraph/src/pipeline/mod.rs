//! Staged build pipeline: from raw dump files to the graph
//! directory, then metrics, analysis and verification on top.
//!
//! Stages run in dependency order and each is checkpointed by a
//! content fingerprint ([`checkpoint`]); reruns skip stages whose
//! inputs and parameters are unchanged. Outputs are written to a
//! staging area and renamed into place, so an interrupted run never
//! leaves a half-written table behind.

use std::path::PathBuf;

use thiserror::Error;

pub mod checkpoint;
pub mod config;
pub mod stages;

pub use config::{parse_override, Config};
pub use stages::{
    cmd_analyze, cmd_build, cmd_metrics, cmd_report, cmd_verify, BuildOutcome, StageStatus,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config {path}: {detail}")]
    Config { path: String, detail: String },
    #[error("bad --set override {0:?} (expected key=value)")]
    BadOverride(String),
    #[error("stage {stage}: required input {path} not found")]
    MissingInput { stage: &'static str, path: PathBuf },
    #[error("graph tables missing under {0}; run `build` first")]
    MissingGraph(PathBuf),
    #[error("metrics table {0} not found; run `metrics` first")]
    MissingMetrics(PathBuf),
    #[error("no reports under {0}; run `build` and `analyze` first")]
    NoReports(PathBuf),
    #[error("integrity check found {0} violation(s); see integrity_report.txt")]
    IntegrityViolations(u64),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<PipelineError>,
    },
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error(transparent)]
    Tsv(#[from] crate::tsv::TsvError),
    #[error(transparent)]
    Analysis(#[from] crate::analysis::AnalysisError),
    #[error(transparent)]
    Rules(#[from] crate::normalize::RuleFileError),
}
