use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{pr_curve, EvalError, FoldAssignment, PrCurve};
use crate::corpus::{Corpus, HouseholdId, RegionId};
use crate::learners::ModelSpec;
use crate::pipeline::{average_rows, rows_digest, task_data, TrainedPipeline};
use crate::task::{FeatureSet, Task};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FoldStatus {
    Done,
    Degenerate { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub status: FoldStatus,
    pub curve: Option<PrCurve>,
    pub training_rows_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveRow {
    pub household_id: HouseholdId,
    pub fold: usize,
    pub score: f64,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub task: Task,
    pub region: RegionId,
    pub model: String,
    pub feature_set: FeatureSet,
    pub n_rows: usize,
    pub prevalence: f64,
    pub folds: Vec<FoldResult>,
    /// Out-of-fold scores from every fold that could be scored.
    pub archive: Vec<ArchiveRow>,
    /// Curve over the pooled archive.
    pub pooled: Option<PrCurve>,
    /// Set when the whole entry could not be evaluated.
    pub degenerate: Option<String>,
    /// Regions of every row that fed a model or a spatial average.
    pub training_regions: BTreeSet<RegionId>,
    pub training_rows_digest: String,
}

impl CvResult {
    pub fn is_degenerate(&self) -> bool {
        self.degenerate.is_some()
    }
}

/// Grouped cross-validation of one (task, region, model, feature set) cell.
/// Averages, imputation statistics and the model are fit per fold on
/// training rows only.
pub fn run_cv(
    task: Task,
    region: RegionId,
    spec: &ModelSpec,
    feature_set: FeatureSet,
    folds: &FoldAssignment,
    corpus: &Corpus,
    grid_step: f64,
) -> Result<CvResult, EvalError> {
    let data = task_data(corpus, task, Some(region));
    let mut result = CvResult {
        task,
        region,
        model: spec.id(),
        feature_set,
        n_rows: data.len(),
        prevalence: data.prevalence(),
        folds: Vec::new(),
        archive: Vec::new(),
        pooled: None,
        degenerate: None,
        training_regions: BTreeSet::new(),
        training_rows_digest: String::new(),
    };
    if data.is_empty() {
        result.degenerate = Some("no labelled households".into());
        return Ok(result);
    }
    let positives = data.positives();
    if positives == 0 || positives == data.len() {
        result.degenerate = Some(format!(
            "single-class labels ({positives} of {} positive)",
            data.len()
        ));
        return Ok(result);
    }
    let mut fold_of = Vec::with_capacity(data.len());
    for &id in &data.ids {
        fold_of.push(folds.fold_of(id).ok_or(EvalError::Unassigned(id))?);
    }

    let mut used = BTreeSet::new();
    for f in 0..folds.k {
        let (mut train, mut train_y, mut test, mut test_y) = (vec![], vec![], vec![], vec![]);
        for (i, &id) in data.ids.iter().enumerate() {
            if fold_of[i] == f {
                test.push(id);
                test_y.push(data.labels[i]);
            } else {
                train.push(id);
                train_y.push(data.labels[i]);
            }
        }
        let degenerate = |reason: String| FoldResult {
            fold: f,
            n_train: train.len(),
            n_test: test.len(),
            status: FoldStatus::Degenerate { reason },
            curve: None,
            training_rows_digest: rows_digest(&train),
        };
        let tp = train_y.iter().filter(|&&l| l).count();
        if train.is_empty() || tp == 0 || tp == train.len() {
            result
                .folds
                .push(degenerate("single-class training labels".into()));
            continue;
        }
        if test.is_empty() {
            result.folds.push(degenerate("empty held-out fold".into()));
            continue;
        }
        let avg_rows = average_rows(corpus, task, Some(region), &train, &test);
        used.extend(train.iter().copied());
        used.extend(avg_rows.iter().copied());
        let pipe = TrainedPipeline::fit(
            corpus,
            task,
            feature_set,
            Some(region),
            spec,
            &train,
            &train_y,
            &avg_rows,
        )?;
        let scores = pipe.score(corpus, &test)?;
        for ((&id, &s), &l) in test.iter().zip(&scores).zip(&test_y) {
            result.archive.push(ArchiveRow {
                household_id: id,
                fold: f,
                score: s,
                label: l,
            });
        }
        let fr = match pr_curve(&scores, &test_y, grid_step) {
            Ok(curve) => FoldResult {
                fold: f,
                n_train: train.len(),
                n_test: test.len(),
                status: FoldStatus::Done,
                curve: Some(curve),
                training_rows_digest: pipe.training_rows_digest.clone(),
            },
            Err(EvalError::NoPositives) => degenerate("no positives in held-out fold".into()),
            Err(e) => return Err(e),
        };
        result.folds.push(fr);
    }
    result.archive.sort_by_key(|a| a.household_id);
    let scores: Vec<f64> = result.archive.iter().map(|a| a.score).collect();
    let labels: Vec<bool> = result.archive.iter().map(|a| a.label).collect();
    result.pooled = match pr_curve(&scores, &labels, grid_step) {
        Ok(c) => Some(c),
        Err(EvalError::Empty | EvalError::NoPositives) => None,
        Err(e) => return Err(e),
    };
    if result.pooled.is_none() {
        result.degenerate = Some("no fold could be scored".into());
    }
    let used: Vec<HouseholdId> = used.into_iter().collect();
    result.training_regions = used
        .iter()
        .filter_map(|&id| corpus.household(id).map(|h| h.region_id))
        .collect();
    result.training_rows_digest = rows_digest(&used);
    Ok(result)
}
