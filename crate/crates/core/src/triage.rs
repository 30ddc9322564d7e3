//! Household triage for follow-up verification: underreporting score,
//! income discrepancy and distance from the minimum welfare line, combined
//! by an adjustable linear loss.

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, HouseholdId};
use crate::pipeline::{PipelineError, TrainedPipeline};
use crate::task::Task;

/// Identifies the scoring formula in every ranking response.
pub const FORMULA_VERSION: &str = "linear-v1";
/// Default fading radius as a fraction of the household's line.
pub const DEFAULT_TAU_FRACTION: f64 = 0.25;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TriageError {
    #[error("pipeline was trained for `{0}`, not underreporting")]
    WrongTask(Task),
    #[error("{field}: {message}")]
    InvalidWeights {
        field: &'static str,
        message: String,
    },
    #[error("invalid page request: {0}")]
    Page(String),
    #[error("{0}")]
    Pipeline(String),
}

impl From<PipelineError> for TriageError {
    fn from(e: PipelineError) -> Self {
        TriageError::Pipeline(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageRecord {
    pub household_id: HouseholdId,
    pub p_underreport: f64,
    pub estimated_income: f64,
    pub self_reported_income: f64,
    /// estimated − self-reported.
    pub income_discrepancy: f64,
    pub lbm: f64,
    /// estimated − lbm; negative means below the line.
    pub distance_from_line: f64,
    pub eligible: bool,
    /// Under the default radius.
    pub faded: bool,
}

impl TriageRecord {
    /// Derived fields from the inputs; `faded` uses the default radius.
    pub fn new(
        household_id: HouseholdId,
        p_underreport: f64,
        estimated_income: f64,
        self_reported_income: f64,
        lbm: f64,
    ) -> Self {
        let distance_from_line = estimated_income - lbm;
        TriageRecord {
            household_id,
            p_underreport,
            estimated_income,
            self_reported_income,
            income_discrepancy: estimated_income - self_reported_income,
            lbm,
            distance_from_line,
            eligible: distance_from_line < 0.0,
            faded: distance_from_line.abs() > DEFAULT_TAU_FRACTION * lbm,
        }
    }

    pub fn tau(&self, weights: &TriageWeights) -> f64 {
        weights.tau.unwrap_or(DEFAULT_TAU_FRACTION * self.lbm)
    }

    /// 1 on the line, falling linearly to 0 at distance τ.
    pub fn proximity(&self, tau: f64) -> f64 {
        (1.0 - self.distance_from_line.abs() / tau).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriageWeights {
    pub w_prob: f64,
    pub w_discrepancy: f64,
    pub w_proximity: f64,
    /// Fading radius in currency per month; `DEFAULT_TAU_FRACTION` of each
    /// household's line when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

impl Default for TriageWeights {
    fn default() -> Self {
        TriageWeights {
            w_prob: 1.0,
            w_discrepancy: 0.0,
            w_proximity: 0.0,
            tau: None,
        }
    }
}

impl TriageWeights {
    pub fn new(w_prob: f64, w_discrepancy: f64, w_proximity: f64) -> Self {
        TriageWeights {
            w_prob,
            w_discrepancy,
            w_proximity,
            tau: None,
        }
    }

    pub fn with_tau(self, tau: f64) -> Self {
        TriageWeights {
            tau: Some(tau),
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), TriageError> {
        let fields = [
            ("w_prob", self.w_prob),
            ("w_discrepancy", self.w_discrepancy),
            ("w_proximity", self.w_proximity),
        ];
        for (field, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(TriageError::InvalidWeights {
                    field,
                    message: format!("must be a finite number >= 0, got {v}"),
                });
            }
        }
        if fields.iter().all(|f| f.1 == 0.0) {
            return Err(TriageError::InvalidWeights {
                field: "weights",
                message: "at least one weight must be positive".into(),
            });
        }
        if let Some(t) = self.tau {
            if !t.is_finite() || t <= 0.0 {
                return Err(TriageError::InvalidWeights {
                    field: "tau",
                    message: format!("must be a finite number > 0, got {t}"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRecord {
    #[serde(flatten)]
    pub record: TriageRecord,
    pub score: f64,
    pub discrepancy_norm: f64,
    pub proximity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub formula_version: String,
    pub weights: TriageWeights,
    pub records: Vec<RankedRecord>,
}

/// One record per surveyed household, ascending by id. A pipeline fit for
/// one region scores only that region's households.
pub fn score_corpus(
    pipeline: &TrainedPipeline,
    corpus: &Corpus,
) -> Result<Vec<TriageRecord>, TriageError> {
    if pipeline.task != Task::Underreporting {
        return Err(TriageError::WrongTask(pipeline.task));
    }
    let mut rows: Vec<_> = corpus
        .surveys
        .iter()
        .filter_map(|s| corpus.household(s.household_id).map(|h| (s, h)))
        .filter(|(_, h)| pipeline.region.is_none_or(|r| h.region_id == r))
        .collect();
    rows.sort_by_key(|(s, _)| s.household_id);
    let ids: Vec<HouseholdId> = rows.iter().map(|(s, _)| s.household_id).collect();
    let scores = pipeline.score(corpus, &ids)?;
    Ok(rows
        .iter()
        .zip(scores)
        .map(|((s, h), p)| {
            let lbm = corpus.welfare_lines(h.location_class).lbm;
            TriageRecord::new(
                s.household_id,
                p,
                s.estimated_income,
                s.self_reported_income,
                lbm,
            )
        })
        .collect())
}

/// Score = w_prob·p + w_discrepancy·d̃ + w_proximity·prox. Records farther
/// than τ from the line come after all others; within each group the order
/// is by score descending, then household id.
pub fn rank(records: &[TriageRecord], weights: &TriageWeights) -> Result<Ranking, TriageError> {
    weights.validate()?;
    let positive = |r: &TriageRecord| r.income_discrepancy.max(0.0);
    let (lo, hi) = records
        .iter()
        .map(positive)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
            (lo.min(d), hi.max(d))
        });
    let mut out: Vec<RankedRecord> = records
        .iter()
        .map(|r| {
            let d = if hi > lo {
                (positive(r) - lo) / (hi - lo)
            } else {
                0.0
            };
            let tau = r.tau(weights);
            let prox = r.proximity(tau);
            let mut record = r.clone();
            record.faded = r.distance_from_line.abs() > tau;
            RankedRecord {
                score: weights.w_prob * r.p_underreport
                    + weights.w_discrepancy * d
                    + weights.w_proximity * prox,
                record,
                discrepancy_norm: d,
                proximity: prox,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        a.record
            .faded
            .cmp(&b.record.faded)
            .then(b.score.total_cmp(&a.score))
            .then(a.record.household_id.cmp(&b.record.household_id))
    });
    Ok(Ranking {
        formula_version: FORMULA_VERSION.to_string(),
        weights: *weights,
        records: out,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordQuery {
    /// Zero-based.
    #[serde(default)]
    pub page: usize,
    #[serde(default = "default_page_size")]
    pub page_size: usize,
    pub faded: Option<bool>,
    pub eligible: Option<bool>,
}

fn default_page_size() -> usize {
    100
}

impl Default for RecordQuery {
    fn default() -> Self {
        RecordQuery {
            page: 0,
            page_size: default_page_size(),
            faded: None,
            eligible: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordPage {
    pub page: usize,
    pub page_size: usize,
    pub n_pages: usize,
    /// Records matching the filters, across all pages.
    pub total: usize,
    pub records: Vec<TriageRecord>,
}

pub const MAX_PAGE_SIZE: usize = 10_000;

pub fn page_records(records: &[TriageRecord], q: &RecordQuery) -> Result<RecordPage, TriageError> {
    if q.page_size == 0 || q.page_size > MAX_PAGE_SIZE {
        return Err(TriageError::Page(format!(
            "page_size must be between 1 and {MAX_PAGE_SIZE}, got {}",
            q.page_size
        )));
    }
    let matching: Vec<&TriageRecord> = records
        .iter()
        .filter(|r| q.faded.is_none_or(|f| r.faded == f))
        .filter(|r| q.eligible.is_none_or(|e| r.eligible == e))
        .collect();
    let total = matching.len();
    Ok(RecordPage {
        page: q.page,
        page_size: q.page_size,
        n_pages: total.div_ceil(q.page_size),
        total,
        records: matching
            .into_iter()
            .skip(q.page.saturating_mul(q.page_size))
            .take(q.page_size)
            .cloned()
            .collect(),
    })
}
