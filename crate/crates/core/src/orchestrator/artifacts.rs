use std::path::{Path, PathBuf};

use super::{io_err, JobEntry, OrchestratorError, RunManifest};
use crate::corpus::{apply_locality_filter, load_corpus, Corpus};
use crate::eval::CvResult;
use crate::pipeline::TrainedPipeline;

/// Read access to a finished (or partly finished) run directory.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

impl RunArtifacts {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, OrchestratorError> {
        let dir = dir.as_ref().to_path_buf();
        let manifest = RunManifest::read(&dir)?;
        Ok(RunArtifacts { dir, manifest })
    }

    /// The corpus the run was evaluated on, after the same filtering.
    pub fn corpus(&self) -> Result<Corpus, OrchestratorError> {
        let c = load_corpus(self.dir.join(&self.manifest.corpus_dir))?;
        Ok(if self.manifest.config.apply_locality_filter {
            apply_locality_filter(&c)
        } else {
            c
        })
    }

    pub fn job(&self, id: &str) -> Result<&JobEntry, OrchestratorError> {
        self.manifest
            .job(id)
            .ok_or_else(|| OrchestratorError::UnknownJob(id.to_string()))
    }

    fn read(&self, job: &JobEntry, name: &str) -> Result<String, OrchestratorError> {
        let path = self.dir.join(job.dir()).join(name);
        std::fs::read_to_string(&path).map_err(io_err(path))
    }

    pub fn cv_result(&self, id: &str) -> Result<CvResult, OrchestratorError> {
        let job = self.job(id)?;
        let text = self.read(job, "cv.json")?;
        serde_json::from_str(&text).map_err(|source| OrchestratorError::Json {
            path: self.dir.join(job.dir()).join("cv.json"),
            source,
        })
    }

    pub fn curves_csv(&self, id: &str) -> Result<String, OrchestratorError> {
        self.read(self.job(id)?, "curves.csv")
    }

    pub fn importances_csv(&self, id: &str) -> Result<String, OrchestratorError> {
        let job = self.job(id)?;
        if !job.artifacts.iter().any(|a| a.ends_with("importances.csv")) {
            return Err(OrchestratorError::NoPipeline(id.to_string()));
        }
        self.read(job, "importances.csv")
    }

    /// Importances as (feature, value), highest first.
    pub fn importances(&self, id: &str) -> Result<Vec<(String, f64)>, OrchestratorError> {
        let text = self.importances_csv(id)?;
        let mut out = Vec::new();
        for line in text.lines().skip(1) {
            let (name, v) = line.rsplit_once(',').unwrap_or((line, ""));
            let v = v.parse().map_err(|_| {
                OrchestratorError::Config(format!("bad importance line `{line}` in job {id}"))
            })?;
            out.push((name.to_string(), v));
        }
        Ok(out)
    }

    pub fn pipeline(&self, id: &str) -> Result<TrainedPipeline, OrchestratorError> {
        let job = self.job(id)?;
        if !job.artifacts.iter().any(|a| a.ends_with("pipeline.json")) {
            return Err(OrchestratorError::NoPipeline(id.to_string()));
        }
        let text = self.read(job, "pipeline.json")?;
        TrainedPipeline::from_json(&text).map_err(|source| OrchestratorError::Json {
            path: self.dir.join(job.dir()).join("pipeline.json"),
            source,
        })
    }
}
