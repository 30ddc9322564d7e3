//! Descriptive tables behind the discussion plots: deprivation by program,
//! benefit-share histograms and verification direction counts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{schema, Corpus, PovertyIndicator, ProgramId, VerificationOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramRow {
    pub program_id: ProgramId,
    pub code: String,
    pub count: usize,
    pub proportion_lacking: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramTable {
    pub indicator: PovertyIndicator,
    pub overall_prevalence: f64,
    pub rows: Vec<ProgramRow>,
    /// Programs without labelled enrollees.
    pub omitted: Vec<ProgramId>,
}

/// Share lacking `indicator` among each program's labelled enrollees, with
/// a normal-approximation 95% interval.
pub fn program_indicator_table(corpus: &Corpus, indicator: PovertyIndicator) -> ProgramTable {
    let mut per: BTreeMap<ProgramId, (usize, usize)> = BTreeMap::new();
    let (mut lacking, mut labelled) = (0usize, 0usize);
    for s in &corpus.surveys {
        let Some(l) = s.label(indicator).as_bool() else {
            continue;
        };
        labelled += 1;
        lacking += usize::from(l);
        let mut programs: Vec<ProgramId> = corpus
            .transactions_of(s.household_id)
            .map(|t| t.program_id)
            .collect();
        programs.sort_unstable();
        programs.dedup();
        for p in programs {
            let e = per.entry(p).or_default();
            e.0 += 1;
            e.1 += usize::from(l);
        }
    }
    let mut rows = Vec::new();
    let mut omitted = Vec::new();
    for p in corpus.program_ids() {
        match per.get(&p) {
            Some(&(n, k)) if n > 0 => {
                let prop = k as f64 / n as f64;
                let half = 1.96 * (prop * (1.0 - prop) / n as f64).sqrt();
                rows.push(ProgramRow {
                    program_id: p,
                    code: corpus
                        .config
                        .programs
                        .iter()
                        .find(|q| q.program_id == p)
                        .map(|q| q.code.clone())
                        .unwrap_or_default(),
                    count: n,
                    proportion_lacking: prop,
                    ci_low: (prop - half).max(0.0),
                    ci_high: (prop + half).min(1.0),
                });
            }
            _ => omitted.push(p),
        }
    }
    ProgramTable {
        indicator,
        overall_prevalence: if labelled > 0 {
            lacking as f64 / labelled as f64
        } else {
            0.0
        },
        rows,
        omitted,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareHistogram {
    pub program_id: ProgramId,
    /// `bins + 1` edges over [0, 1].
    pub edges: Vec<f64>,
    pub lacking: Vec<usize>,
    pub not_lacking: Vec<usize>,
    pub excluded_zero_share: usize,
    pub excluded_no_benefits: usize,
}

pub fn share_bin(share: f64, bins: usize) -> usize {
    ((share * bins as f64).floor() as usize).min(bins - 1)
}

/// Per household, the share of its total benefit amount paid by `program`,
/// binned separately for lacking and not-lacking households. Zero shares
/// are left out.
pub fn benefit_share_histogram(
    corpus: &Corpus,
    indicator: PovertyIndicator,
    program: ProgramId,
    bins: usize,
) -> ShareHistogram {
    let bins = bins.max(1);
    let mut h = ShareHistogram {
        program_id: program,
        edges: (0..=bins).map(|i| i as f64 / bins as f64).collect(),
        lacking: vec![0; bins],
        not_lacking: vec![0; bins],
        excluded_zero_share: 0,
        excluded_no_benefits: 0,
    };
    for s in &corpus.surveys {
        let Some(l) = s.label(indicator).as_bool() else {
            continue;
        };
        let (mut total, mut from_p) = (0.0, 0.0);
        for t in corpus.transactions_of(s.household_id) {
            total += t.amount;
            if t.program_id == program {
                from_p += t.amount;
            }
        }
        if total <= 0.0 {
            h.excluded_no_benefits += 1;
            continue;
        }
        if from_p <= 0.0 {
            h.excluded_zero_share += 1;
            continue;
        }
        let b = share_bin(from_p / total, bins);
        if l {
            h.lacking[b] += 1;
        } else {
            h.not_lacking[b] += 1;
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionRow {
    pub question: String,
    pub n_verified: usize,
    pub n_discrepancies: usize,
    pub n_under: usize,
    pub n_over: usize,
}

impl DirectionRow {
    pub fn under_share(&self) -> Option<f64> {
        (self.n_discrepancies > 0).then(|| self.n_under as f64 / self.n_discrepancies as f64)
    }

    pub fn share_without_discrepancy(&self) -> Option<f64> {
        (self.n_verified > 0)
            .then(|| (self.n_verified - self.n_discrepancies) as f64 / self.n_verified as f64)
    }
}

/// Under/over split of discrepancies for every verifiable question.
pub fn discrepancy_direction_report(corpus: &Corpus) -> Vec<DirectionRow> {
    schema::verifiable_questions()
        .map(|q| {
            let mut row = DirectionRow {
                question: q.id.to_string(),
                n_verified: 0,
                n_discrepancies: 0,
                n_under: 0,
                n_over: 0,
            };
            for v in &corpus.verifications {
                match v.entries.get(q.id) {
                    None => {}
                    Some(o) => {
                        row.n_verified += 1;
                        match o {
                            VerificationOutcome::Match => {}
                            VerificationOutcome::UnderReported => {
                                row.n_discrepancies += 1;
                                row.n_under += 1;
                            }
                            VerificationOutcome::OverReported => {
                                row.n_discrepancies += 1;
                                row.n_over += 1;
                            }
                        }
                    }
                }
            }
            row
        })
        .collect()
}
