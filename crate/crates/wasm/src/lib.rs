//! In-browser triage demo. Everything runs in the page: a small synthetic
//! corpus, an underreporting model, weighted ranking and grouped CV curves.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use povtriage::corpus::{generate_corpus, Corpus, CorpusConfig, RegionId};
use povtriage::eval::{make_grouped_folds, run_cv, DEFAULT_GRID_STEP};
use povtriage::learners::ModelSpec;
use povtriage::pipeline::{average_rows, task_data, TrainedPipeline};
use povtriage::triage::{
    rank, score_corpus, RankedRecord, TriageRecord, TriageWeights, FORMULA_VERSION,
};
use povtriage::{FeatureSet, Task};

const REGION: RegionId = RegionId(1);
const MODEL_ESTIMATORS: usize = 40;

#[derive(Debug, thiserror::Error)]
pub enum DemoError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Core(String),
}

fn core(e: impl std::fmt::Display) -> DemoError {
    DemoError::Core(e.to_string())
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub households: usize,
    pub surveyed: usize,
    pub verified: usize,
    pub underreporting_rate: f64,
    pub model: String,
    pub formula_version: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankView {
    pub total: usize,
    pub faded: usize,
    pub records: Vec<RankedRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub flagged: f64,
    pub precision: Option<f64>,
    pub recall: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveSummary {
    pub task: String,
    pub model: String,
    pub n_rows: usize,
    pub prevalence: f64,
    /// Precision at 10, 20 and 30 percent flagged.
    pub precision_at: [Option<f64>; 3],
    pub points: Vec<CurvePoint>,
}

/// Native core of the demo; the wasm wrapper only converts values.
pub struct Demo {
    corpus: Corpus,
    model: String,
    records: Vec<TriageRecord>,
}

impl Demo {
    pub fn new(households: usize, seed: u64) -> Result<Demo, DemoError> {
        if !(200..=20_000).contains(&households) {
            return Err(DemoError::Input(
                "households must be between 200 and 20000".into(),
            ));
        }
        let cfg = CorpusConfig {
            n_households: households,
            n_regions: 1,
            n_localities: (households / 100).max(4),
            // More home visits than the default so the small demo has labels to learn from.
            verification_fraction: 0.3,
            seed,
            ..Default::default()
        };
        let corpus = generate_corpus(&cfg).map_err(core)?;
        let spec = ModelSpec::gbm(MODEL_ESTIMATORS);
        let data = task_data(&corpus, Task::Underreporting, Some(REGION));
        let avg = average_rows(&corpus, Task::Underreporting, Some(REGION), &data.ids, &[]);
        let pipe = TrainedPipeline::fit(
            &corpus,
            Task::Underreporting,
            FeatureSet::Combined,
            Some(REGION),
            &spec,
            &data.ids,
            &data.labels,
            &avg,
        )
        .map_err(core)?;
        let records = score_corpus(&pipe, &corpus).map_err(core)?;
        Ok(Demo {
            corpus,
            model: spec.id(),
            records,
        })
    }

    pub fn summary(&self) -> Summary {
        let data = task_data(&self.corpus, Task::Underreporting, None);
        Summary {
            households: self.corpus.households.len(),
            surveyed: self.corpus.surveys.len(),
            verified: data.len(),
            underreporting_rate: data.prevalence(),
            model: self.model.clone(),
            formula_version: FORMULA_VERSION,
        }
    }

    /// Top `limit` records under `weights`.
    pub fn rank(&self, weights: &TriageWeights, limit: usize) -> Result<RankView, DemoError> {
        let r = rank(&self.records, weights).map_err(|e| DemoError::Input(e.to_string()))?;
        let faded = r.records.iter().filter(|x| x.record.faded).count();
        Ok(RankView {
            total: r.records.len(),
            faded,
            records: r.records.into_iter().take(limit).collect(),
        })
    }

    /// Grouped cross-validation curve for one task and model id.
    pub fn evaluate(
        &self,
        task: &str,
        model: &str,
        folds: usize,
    ) -> Result<CurveSummary, DemoError> {
        let task = task
            .parse::<Task>()
            .map_err(|e| DemoError::Input(e.to_string()))?;
        let spec = model
            .parse::<ModelSpec>()
            .map_err(|e| DemoError::Input(e.to_string()))?;
        let assign =
            make_grouped_folds(self.corpus.households_in(REGION), folds, 7).map_err(core)?;
        let cv = run_cv(
            task,
            REGION,
            &spec,
            FeatureSet::Combined,
            &assign,
            &self.corpus,
            DEFAULT_GRID_STEP,
        )
        .map_err(core)?;
        let curve = cv
            .pooled
            .ok_or_else(|| DemoError::Core(cv.degenerate.unwrap_or_else(|| "no curve".into())))?;
        Ok(CurveSummary {
            task: task.to_string(),
            model: spec.id(),
            n_rows: cv.n_rows,
            prevalence: cv.prevalence,
            precision_at: [0.1, 0.2, 0.3].map(|q| curve.precision_at_flagged(q)),
            points: curve
                .points
                .iter()
                .map(|p| CurvePoint {
                    flagged: p.proportion_flagged,
                    precision: p.precision,
                    recall: p.recall,
                })
                .collect(),
        })
    }
}

fn to_js<T: Serialize>(v: &T) -> Result<JsValue, JsError> {
    v.serialize(&serde_wasm_bindgen::Serializer::json_compatible())
        .map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub struct TriageDemo(Demo);

#[wasm_bindgen]
impl TriageDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(households: usize, seed: u32) -> Result<TriageDemo, JsError> {
        Demo::new(households, u64::from(seed))
            .map(TriageDemo)
            .map_err(|e| JsError::new(&e.to_string()))
    }

    pub fn summary(&self) -> Result<JsValue, JsError> {
        to_js(&self.0.summary())
    }

    /// `tau` of zero or less means the per-record default band.
    pub fn rank(
        &self,
        w_prob: f64,
        w_discrepancy: f64,
        w_proximity: f64,
        tau: f64,
        limit: usize,
    ) -> Result<JsValue, JsError> {
        let mut w = TriageWeights::new(w_prob, w_discrepancy, w_proximity);
        if tau > 0.0 {
            w = w.with_tau(tau);
        }
        let view = self
            .0
            .rank(&w, limit)
            .map_err(|e| JsError::new(&e.to_string()))?;
        to_js(&view)
    }

    pub fn evaluate(&self, task: &str, model: &str) -> Result<JsValue, JsError> {
        let s = self
            .0
            .evaluate(task, model, 5)
            .map_err(|e| JsError::new(&e.to_string()))?;
        to_js(&s)
    }
}
