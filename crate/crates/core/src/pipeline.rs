//! Task rows, feature construction and a fitted model bundled so that the
//! same transformation can be replayed on new households.

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DateWindow, HouseholdId, RegionId};
use crate::featurize::{
    build_socioeconomic_features, build_spatial_features, build_survey_features,
    build_transactional_features, Family, FeatureError, FeatureMatrix, FoldRestrictedAverages,
    Preprocessor,
};
use crate::learners::{fit, LearnerError, ModelSpec, TrainedModel};
use crate::task::{FeatureSet, Task};
use crate::util::sha256_hex;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error("household {0} has no questionnaire but the survey family was requested")]
    MissingSurvey(HouseholdId),
}

/// Labelled rows for one task, ascending by household id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TaskData {
    pub ids: Vec<HouseholdId>,
    pub labels: Vec<bool>,
}

impl TaskData {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn prevalence(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.positives() as f64 / self.len() as f64
        }
    }
}

/// Rows that carry a label for `task`, optionally limited to one region.
/// Underreporting is labelled only where a home verification took place.
pub fn task_data(corpus: &Corpus, task: Task, region: Option<RegionId>) -> TaskData {
    let mut rows: Vec<(HouseholdId, bool)> = corpus
        .households
        .iter()
        .filter(|h| region.is_none_or(|r| h.region_id == r))
        .filter_map(|h| {
            let id = h.household_id;
            let label = match task {
                Task::Underreporting => {
                    corpus.survey(id)?;
                    corpus.verification(id)?.any_discrepancy()
                }
                Task::Indicator(i) => corpus.survey(id)?.label(i).as_bool()?,
            };
            Some((id, label))
        })
        .collect();
    rows.sort_by_key(|r| r.0);
    TaskData {
        ids: rows.iter().map(|r| r.0).collect(),
        labels: rows.iter().map(|r| r.1).collect(),
    }
}

/// Households whose indicator labels may feed the spatial averages when
/// `held_out` is being scored. For imputation these are the training rows;
/// underreporting may also use every other questionnaire in the region.
pub fn average_rows(
    corpus: &Corpus,
    task: Task,
    region: Option<RegionId>,
    training: &[HouseholdId],
    held_out: &[HouseholdId],
) -> Vec<HouseholdId> {
    match task {
        Task::Indicator(_) => training.to_vec(),
        Task::Underreporting => {
            let held: std::collections::HashSet<_> = held_out.iter().collect();
            corpus
                .surveys
                .iter()
                .map(|s| s.household_id)
                .filter(|id| !held.contains(id))
                .filter(|&id| {
                    region.is_none_or(|r| corpus.household(id).is_some_and(|h| h.region_id == r))
                })
                .collect()
        }
    }
}

pub fn rows_digest(ids: &[HouseholdId]) -> String {
    let mut v: Vec<u32> = ids.iter().map(|h| h.0).collect();
    v.sort_unstable();
    v.dedup();
    let text: Vec<String> = v.iter().map(u32::to_string).collect();
    sha256_hex(text.join(",").as_bytes())
}

/// Raw (unimputed) matrix of the selected families for `ids`.
pub fn raw_features(
    corpus: &Corpus,
    ids: &[HouseholdId],
    families: &[Family],
    window: &DateWindow,
    averages: Option<&FoldRestrictedAverages>,
) -> Result<FeatureMatrix, PipelineError> {
    let mut parts = Vec::new();
    for fam in families {
        let m = match fam {
            Family::Survey => {
                let s = build_survey_features(corpus, ids);
                if let Some(&id) = s.skipped.first() {
                    return Err(PipelineError::MissingSurvey(id));
                }
                s.matrix
            }
            Family::Transactional => build_transactional_features(corpus, ids, window),
            Family::Spatial => {
                let avg = averages
                    .ok_or_else(|| FeatureError::EmptyTraining("spatial averages".into()))?;
                build_spatial_features(corpus, ids, avg)
            }
            Family::Socioeconomic => build_socioeconomic_features(corpus, ids),
        };
        parts.push(m);
    }
    let mut columns = Vec::new();
    for p in &parts {
        columns.extend(p.columns.iter().cloned());
    }
    let mut out = FeatureMatrix::new(ids.to_vec(), columns);
    let mut offset = 0;
    for p in &parts {
        for r in 0..p.n_rows() {
            for c in 0..p.n_cols() {
                if p.is_missing(r, c) {
                    out.set_missing(r, offset + c);
                } else {
                    out.set(r, offset + c, p.get(r, c));
                }
            }
        }
        offset += p.n_cols();
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPipeline {
    pub task: Task,
    pub feature_set: FeatureSet,
    pub region: Option<RegionId>,
    pub families: Vec<Family>,
    pub window: DateWindow,
    pub averages: Option<FoldRestrictedAverages>,
    pub preprocessor: Preprocessor,
    pub model: TrainedModel,
    pub training_rows_digest: String,
}

impl TrainedPipeline {
    /// Fit on `train` (with `labels`); spatial averages draw on
    /// `average_rows`.
    #[allow(clippy::too_many_arguments)]
    pub fn fit(
        corpus: &Corpus,
        task: Task,
        feature_set: FeatureSet,
        region: Option<RegionId>,
        spec: &ModelSpec,
        train: &[HouseholdId],
        labels: &[bool],
        average_rows: &[HouseholdId],
    ) -> Result<TrainedPipeline, PipelineError> {
        let families = Family::selected(feature_set, task)?;
        let averages = if families.contains(&Family::Spatial) {
            Some(FoldRestrictedAverages::compute(corpus, average_rows)?)
        } else {
            None
        };
        let window = corpus.config.window;
        let raw = raw_features(corpus, train, &families, &window, averages.as_ref())?;
        let preprocessor = Preprocessor::fit(&raw, None);
        let x = preprocessor.apply(&raw)?;
        let model = fit(spec, &x, labels)?;
        Ok(TrainedPipeline {
            task,
            feature_set,
            region,
            families,
            window,
            averages,
            preprocessor,
            model,
            training_rows_digest: rows_digest(train),
        })
    }

    /// Preprocessed feature matrix for `ids`, in the training schema.
    pub fn features(
        &self,
        corpus: &Corpus,
        ids: &[HouseholdId],
    ) -> Result<FeatureMatrix, PipelineError> {
        let raw = raw_features(
            corpus,
            ids,
            &self.families,
            &self.window,
            self.averages.as_ref(),
        )?;
        Ok(self.preprocessor.apply(&raw)?)
    }

    pub fn score(&self, corpus: &Corpus, ids: &[HouseholdId]) -> Result<Vec<f64>, PipelineError> {
        let x = self.features(corpus, ids)?;
        Ok(self.model.predict_proba(&x)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("pipelines serialize")
    }

    pub fn from_json(s: &str) -> serde_json::Result<TrainedPipeline> {
        serde_json::from_str(s)
    }
}
