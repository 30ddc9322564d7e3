use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::corpus::{BlockId, Corpus, HouseholdId, LocalityId, PovertyIndicator};
use crate::util::sha256_hex;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
struct Tally {
    positives: u32,
    count: u32,
}

impl Tally {
    fn add(&mut self, label: bool) {
        self.positives += u32::from(label);
        self.count += 1;
    }

    /// Mean after optionally removing one contributing label.
    fn mean_without(self, own: Option<bool>) -> Option<f64> {
        let (p, n) = match own {
            Some(l) => (self.positives - u32::from(l), self.count - 1),
            None => (self.positives, self.count),
        };
        (n > 0).then(|| f64::from(p) / f64::from(n))
    }
}

/// Training-row label means for one indicator at block, locality and global
/// level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorAverages {
    pub indicator: PovertyIndicator,
    block: BTreeMap<BlockId, Tally>,
    locality: BTreeMap<LocalityId, Tally>,
    global: Tally,
    /// Training labels, so a training household's own label can be left out
    /// of the averages it is shown.
    training: BTreeMap<HouseholdId, bool>,
}

impl IndicatorAverages {
    pub fn block_mean(&self, block: BlockId) -> Option<f64> {
        self.block.get(&block).and_then(|t| t.mean_without(None))
    }

    pub fn locality_mean(&self, locality: LocalityId) -> Option<f64> {
        self.locality
            .get(&locality)
            .and_then(|t| t.mean_without(None))
    }

    pub fn global_mean(&self) -> f64 {
        self.global.mean_without(None).unwrap_or(0.0)
    }

    pub fn n_training(&self) -> usize {
        self.training.len()
    }

    /// Block mean, falling back to locality then global. Training households
    /// see means computed without their own label.
    pub fn lookup(&self, corpus: &Corpus, household: HouseholdId) -> f64 {
        let own = self.training.get(&household).copied();
        let h = corpus.household(household);
        let block = h
            .and_then(|h| h.block_id)
            .and_then(|b| self.block.get(&b))
            .and_then(|t| t.mean_without(own));
        let locality = || {
            h.and_then(|h| h.locality_id)
                .and_then(|l| self.locality.get(&l))
                .and_then(|t| t.mean_without(own))
        };
        block
            .or_else(locality)
            .or_else(|| self.global.mean_without(own))
            .unwrap_or_else(|| self.global_mean())
    }
}

pub fn compute_fold_averages(
    corpus: &Corpus,
    indicator: PovertyIndicator,
    training_rows: &[HouseholdId],
) -> Result<IndicatorAverages, FeatureError> {
    let mut out = IndicatorAverages {
        indicator,
        block: BTreeMap::new(),
        locality: BTreeMap::new(),
        global: Tally::default(),
        training: BTreeMap::new(),
    };
    for &id in training_rows {
        let Some(label) = corpus.survey(id).and_then(|s| s.label(indicator).as_bool()) else {
            continue;
        };
        if out.training.insert(id, label).is_some() {
            continue;
        }
        out.global.add(label);
        if let Some(h) = corpus.household(id) {
            if let Some(b) = h.block_id {
                out.block.entry(b).or_default().add(label);
            }
            if let Some(l) = h.locality_id {
                out.locality.entry(l).or_default().add(label);
            }
        }
    }
    if out.training.is_empty() {
        return Err(FeatureError::EmptyTraining(format!("{indicator} averages")));
    }
    Ok(out)
}

/// Averages for all six indicators over one training row set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRestrictedAverages {
    pub per_indicator: Vec<IndicatorAverages>,
    /// Digest of the sorted training household ids.
    pub training_row_set: String,
}

impl FoldRestrictedAverages {
    pub fn compute(corpus: &Corpus, training_rows: &[HouseholdId]) -> Result<Self, FeatureError> {
        if training_rows.is_empty() {
            return Err(FeatureError::EmptyTraining("spatial averages".into()));
        }
        let per_indicator = PovertyIndicator::ALL
            .iter()
            .map(|&i| {
                compute_fold_averages(corpus, i, training_rows).or_else(|_| {
                    // No labelled training rows for this indicator: every
                    // lookup lands on an empty global tally.
                    Ok(IndicatorAverages {
                        indicator: i,
                        block: BTreeMap::new(),
                        locality: BTreeMap::new(),
                        global: Tally::default(),
                        training: BTreeMap::new(),
                    })
                })
            })
            .collect::<Result<Vec<_>, FeatureError>>()?;
        let mut ids: Vec<u32> = training_rows.iter().map(|h| h.0).collect();
        ids.sort_unstable();
        ids.dedup();
        let text: Vec<String> = ids.iter().map(u32::to_string).collect();
        Ok(FoldRestrictedAverages {
            per_indicator,
            training_row_set: sha256_hex(text.join(",").as_bytes()),
        })
    }

    pub fn get(&self, indicator: PovertyIndicator) -> &IndicatorAverages {
        &self.per_indicator[indicator.ordinal()]
    }
}
