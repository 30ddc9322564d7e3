use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{write_atomic, ExperimentConfig, OrchestratorError};
use crate::corpus::RegionId;
use crate::task::{FeatureSet, Task};

pub const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum JobStatus {
    Pending,
    Done,
    Degenerate { reason: String },
    Failed { reason: String },
}

impl JobStatus {
    /// Finished jobs are skipped on a re-run.
    pub fn is_finished(&self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Degenerate { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            JobStatus::Pending => "pending",
            JobStatus::Done => "done",
            JobStatus::Degenerate { .. } => "degenerate",
            JobStatus::Failed { .. } => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobEntry {
    pub id: String,
    pub region: RegionId,
    pub task: Task,
    pub model: String,
    pub feature_set: FeatureSet,
    #[serde(flatten)]
    pub status: JobStatus,
    /// Paths relative to the run directory.
    pub artifacts: Vec<String>,
    pub wall_clock_secs: Option<f64>,
    /// Regions of every row that fed a model or a spatial average.
    pub training_regions: Vec<RegionId>,
    pub training_rows_digest: Option<String>,
}

impl JobEntry {
    pub fn new(region: RegionId, task: Task, model: String, feature_set: FeatureSet) -> Self {
        JobEntry {
            id: format!("{region}_{task}_{model}_{feature_set}"),
            region,
            task,
            model,
            feature_set,
            status: JobStatus::Pending,
            artifacts: Vec::new(),
            wall_clock_secs: None,
            training_regions: Vec::new(),
            training_rows_digest: None,
        }
    }

    pub fn dir(&self) -> PathBuf {
        Path::new("jobs").join(&self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub config: ExperimentConfig,
    pub config_fingerprint: String,
    /// Relative to the run directory unless absolute.
    pub corpus_dir: PathBuf,
    pub jobs: Vec<JobEntry>,
}

impl RunManifest {
    pub fn new(config: ExperimentConfig, corpus_dir: PathBuf, jobs: Vec<JobEntry>) -> Self {
        RunManifest {
            manifest_version: MANIFEST_VERSION,
            config_fingerprint: config.fingerprint(),
            config,
            corpus_dir,
            jobs,
        }
    }

    pub fn read(run_dir: &Path) -> Result<RunManifest, OrchestratorError> {
        let path = run_dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(super::io_err(&path))?;
        serde_json::from_str(&text).map_err(|source| OrchestratorError::Json { path, source })
    }

    pub fn write(&self, run_dir: &Path) -> Result<(), OrchestratorError> {
        let text = serde_json::to_string_pretty(self).expect("manifests serialize");
        write_atomic(&run_dir.join(MANIFEST_FILE), text.as_bytes())
    }

    pub fn job(&self, id: &str) -> Option<&JobEntry> {
        self.jobs.iter().find(|j| j.id == id)
    }

    pub fn count(&self, state: &str) -> usize {
        self.jobs
            .iter()
            .filter(|j| j.status.name() == state)
            .count()
    }

    pub fn any_failed(&self) -> bool {
        self.count("failed") > 0
    }

    /// `done=.. degenerate=.. failed=.. pending=..`
    pub fn summary(&self) -> String {
        ["done", "degenerate", "failed", "pending"]
            .iter()
            .map(|s| format!("{s}={}", self.count(s)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// The manifest with wall-clock times cleared, for comparing runs.
    pub fn without_timings(&self) -> RunManifest {
        let mut m = self.clone();
        for j in &mut m.jobs {
            j.wall_clock_secs = None;
        }
        m
    }
}
