use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use super::OrchestratorError;
use crate::corpus::{CorpusConfig, RegionId};
use crate::eval::{grid_steps, DEFAULT_GRID_STEP};
use crate::learners::ModelSpec;
use crate::task::{FeatureSet, Task};
use crate::util::sha256_hex;

/// Default parent directory for runs whose config names no output directory.
pub const OUTPUT_ROOT_ENV: &str = "POVTRIAGE_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSource {
    Generate(CorpusConfig),
    Load(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: CorpusSource,
    pub tasks: Vec<Task>,
    /// All regions of the corpus when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<Vec<RegionId>>,
    /// Each entry is a short id (`gbm-100`) or a full spec object.
    #[serde(deserialize_with = "model_list")]
    pub models: Vec<ModelSpec>,
    pub feature_sets: Vec<FeatureSet>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Worker count; the machine's available parallelism when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallelism: Option<usize>,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    /// Drop households without locality information before running.
    #[serde(default = "yes")]
    pub apply_locality_filter: bool,
}

fn default_folds() -> usize {
    5
}

fn default_grid_step() -> f64 {
    DEFAULT_GRID_STEP
}

fn yes() -> bool {
    true
}

fn model_list<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<ModelSpec>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Id(String),
        Spec(ModelSpec),
    }
    Vec::<Entry>::deserialize(d)?
        .into_iter()
        .map(|e| match e {
            Entry::Id(s) => s.parse().map_err(serde::de::Error::custom),
            Entry::Spec(m) => Ok(m),
        })
        .collect()
}

/// `$POVTRIAGE_OUTPUT_ROOT`, or `runs` in the working directory.
pub fn default_output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .filter(|v| !v.is_empty())
        .map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, OrchestratorError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| OrchestratorError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, OrchestratorError> {
        let text = std::fs::read_to_string(path).map_err(super::io_err(path))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialize")
    }

    /// Checks that do not need the corpus.
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let bad = |m: String| Err(OrchestratorError::Config(m));
        if self.tasks.is_empty() {
            return bad("at least one task is required".into());
        }
        if self.models.is_empty() {
            return bad("at least one model is required".into());
        }
        if self.feature_sets.is_empty() {
            return bad("at least one feature set is required".into());
        }
        if self.folds < 2 {
            return bad(format!("folds must be at least 2, got {}", self.folds));
        }
        if self.parallelism == Some(0) {
            return bad("parallelism must be at least 1".into());
        }
        grid_steps(self.grid_step).map_err(|e| OrchestratorError::Config(e.to_string()))?;
        for m in &self.models {
            m.validate()
                .map_err(|e| OrchestratorError::Config(format!("model {}: {e}", m.id())))?;
        }
        if let Some(dup) = first_duplicate(self.models.iter().map(ModelSpec::id)) {
            return bad(format!("model `{dup}` is listed twice"));
        }
        if let Some(dup) = first_duplicate(self.tasks.iter().map(Task::to_string)) {
            return bad(format!("task `{dup}` is listed twice"));
        }
        if let Some(dup) = first_duplicate(self.feature_sets.iter().map(FeatureSet::to_string)) {
            return bad(format!("feature set `{dup}` is listed twice"));
        }
        if let Some(r) = &self.regions {
            if r.is_empty() {
                return bad("regions, when given, must not be empty".into());
            }
            if let Some(dup) = first_duplicate(r.iter().map(RegionId::to_string)) {
                return bad(format!("region {dup} is listed twice"));
            }
        }
        if let CorpusSource::Generate(c) = &self.corpus {
            c.validate()
                .map_err(|e| OrchestratorError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn worker_count(&self) -> usize {
        self.parallelism.unwrap_or_else(|| {
            std::thread::available_parallelism().map_or(1, std::num::NonZeroUsize::get)
        })
    }

    /// Digest of the settings that determine job results. Output location
    /// and worker count are excluded.
    pub fn fingerprint(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        c.parallelism = None;
        sha256_hex(
            serde_json::to_string(&c)
                .expect("configs serialize")
                .as_bytes(),
        )
    }

    /// The configured directory, else `<output root>/run-<fingerprint>`.
    pub fn resolve_output_dir(&self) -> PathBuf {
        match &self.output_dir {
            Some(d) => d.clone(),
            None => default_output_root().join(format!("run-{}", &self.fingerprint()[..12])),
        }
    }
}

fn first_duplicate(items: impl Iterator<Item = String>) -> Option<String> {
    let mut seen = BTreeSet::new();
    items.into_iter().find(|i| !seen.insert(i.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "corpus": {"generate": {"n_households": 500, "n_regions": 2}},
        "tasks": ["education", "underreporting"],
        "models": ["gbm-100", {"kind": "knn", "neighbors": 25}],
        "feature_sets": ["combined"]
    }"#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.folds, 5);
        assert_eq!(c.grid_step, 0.01);
        assert!(c.apply_locality_filter);
        let ids: Vec<String> = c.models.iter().map(ModelSpec::id).collect();
        assert_eq!(ids, ["gbm-100", "knn-25"]);
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_empty_lists_and_duplicates() {
        let no_models = MINIMAL.replace(r#"["gbm-100", {"kind": "knn", "neighbors": 25}]"#, "[]");
        assert!(ExperimentConfig::from_json(&no_models)
            .unwrap_err()
            .to_string()
            .contains("model"));
        let dup = MINIMAL.replace(r#"{"kind": "knn", "neighbors": 25}"#, r#""gbm-100""#);
        assert!(ExperimentConfig::from_json(&dup)
            .unwrap_err()
            .to_string()
            .contains("listed twice"));
        let typo = MINIMAL.replace("\"tasks\"", "\"taks\"");
        assert!(ExperimentConfig::from_json(&typo).is_err());
    }

    #[test]
    fn fingerprint_ignores_location_and_workers() {
        let a = ExperimentConfig::from_json(MINIMAL).unwrap();
        let mut b = a.clone();
        b.output_dir = Some("elsewhere".into());
        b.parallelism = Some(3);
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.seed = 9;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
