//! Config-driven grid runner: one job per (region, task, model, feature set),
//! executed on a fixed worker pool with a single manifest writer.

mod artifacts;
mod config;
mod manifest;
mod run;

use std::path::PathBuf;

pub use artifacts::RunArtifacts;
pub use config::{default_output_root, CorpusSource, ExperimentConfig, OUTPUT_ROOT_ENV};
pub use manifest::{JobEntry, JobStatus, RunManifest, MANIFEST_FILE};
pub use run::{plan, run, RunReport};

use crate::corpus::{CorpusError, RegionId};
use crate::eval::EvalError;
use crate::pipeline::PipelineError;

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error("region {0} does not exist in the corpus")]
    UnknownRegion(RegionId),
    #[error(
        "{0} already holds a run with a different configuration; choose another output directory"
    )]
    ConfigMismatch(PathBuf),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("no job `{0}` in this run")]
    UnknownJob(String),
    #[error("job `{0}` has no fitted pipeline")]
    NoPipeline(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> OrchestratorError {
    let path = path.into();
    move |source| OrchestratorError::Io { path, source }
}

/// Write through a sibling temporary file and rename over `path`.
pub(crate) fn write_atomic(path: &std::path::Path, bytes: &[u8]) -> Result<(), OrchestratorError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}
