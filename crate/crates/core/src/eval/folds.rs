use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::HouseholdId;
use crate::util::rng_stream;

const FOLD_STREAM: u64 = 11;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub folds: BTreeMap<HouseholdId, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, id: HouseholdId) -> Option<usize> {
        self.folds.get(&id).copied()
    }

    /// Members of fold `f`, ascending.
    pub fn members(&self, f: usize) -> Vec<HouseholdId> {
        self.folds
            .iter()
            .filter(|(_, &g)| g == f)
            .map(|(&id, _)| id)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in self.folds.values() {
            s[f] += 1;
        }
        s
    }
}

/// Seeded shuffle of the distinct households, then round-robin. Every
/// record of a household follows the household into its fold.
pub fn make_grouped_folds(
    household_ids: &[HouseholdId],
    k: usize,
    seed: u64,
) -> Result<FoldAssignment, EvalError> {
    let mut ids = household_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if k < 2 {
        return Err(EvalError::FoldCount {
            k,
            households: ids.len(),
        });
    }
    if k > ids.len() {
        return Err(EvalError::FoldCount {
            k,
            households: ids.len(),
        });
    }
    ids.shuffle(&mut rng_stream(seed, FOLD_STREAM));
    Ok(FoldAssignment {
        k,
        folds: ids
            .into_iter()
            .enumerate()
            .map(|(i, id)| (id, i % k))
            .collect(),
    })
}
