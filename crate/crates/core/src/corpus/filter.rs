use std::collections::HashSet;

use super::{Corpus, HouseholdId, IndicatorLabel, PovertyIndicator};

fn retain(corpus: &Corpus, keep: &HashSet<HouseholdId>) -> Corpus {
    Corpus::new(
        corpus.config.clone(),
        corpus
            .households
            .iter()
            .filter(|h| keep.contains(&h.household_id))
            .cloned()
            .collect(),
        corpus
            .surveys
            .iter()
            .filter(|s| keep.contains(&s.household_id))
            .cloned()
            .collect(),
        corpus
            .verifications
            .iter()
            .filter(|v| keep.contains(&v.household_id))
            .cloned()
            .collect(),
        corpus
            .transactions
            .iter()
            .filter(|t| keep.contains(&t.household_id))
            .cloned()
            .collect(),
        corpus.localities.clone(),
        corpus.blocks.clone(),
        corpus
            .ground_truth
            .iter()
            .filter(|g| keep.contains(&g.household_id))
            .cloned()
            .collect(),
    )
}

/// Keep only households with a known locality, along with their dependent
/// records.
pub fn apply_locality_filter(corpus: &Corpus) -> Corpus {
    let keep: HashSet<HouseholdId> = corpus
        .households
        .iter()
        .filter(|h| h.locality_id.is_some())
        .map(|h| h.household_id)
        .collect();
    retain(corpus, &keep)
}

/// Task view for one indicator: households whose label for `indicator` is
/// missing (or who never took the questionnaire) are dropped.
pub fn drop_missing_labels(corpus: &Corpus, indicator: PovertyIndicator) -> Corpus {
    let keep: HashSet<HouseholdId> = corpus
        .surveys
        .iter()
        .filter(|s| s.label(indicator) != IndicatorLabel::Missing)
        .map(|s| s.household_id)
        .collect();
    retain(corpus, &keep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_corpus, CorpusConfig};

    fn base() -> Corpus {
        generate_corpus(&CorpusConfig {
            n_households: 1_000,
            n_regions: 3,
            n_localities: 30,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn locality_filter_is_consistent() {
        let c = base();
        let f = apply_locality_filter(&c);
        assert!(f.households.iter().all(|h| h.locality_id.is_some()));
        let expected = c
            .households
            .iter()
            .filter(|h| h.locality_id.is_some())
            .count();
        assert_eq!(f.households.len(), expected);
        for t in &f.transactions {
            assert!(f.household(t.household_id).is_some());
        }
        for s in &f.surveys {
            assert!(f.household(s.household_id).is_some());
        }
    }

    #[test]
    fn locality_filter_edges() {
        let mut all = base();
        for h in all.households.iter_mut() {
            h.locality_id = Some(crate::corpus::LocalityId(1));
        }
        assert_eq!(
            apply_locality_filter(&all).households.len(),
            all.households.len()
        );
        let mut none = base();
        for h in none.households.iter_mut() {
            h.locality_id = None;
            h.block_id = None;
            h.block_coords = None;
        }
        let f = apply_locality_filter(&none);
        assert!(f.households.is_empty() && f.surveys.is_empty() && f.transactions.is_empty());
    }

    #[test]
    fn drop_missing_labels_counts() {
        let mut c = base();
        c.surveys.truncate(100);
        for s in c.surveys.iter_mut() {
            s.indicator_labels
                .insert(PovertyIndicator::Food, IndicatorLabel::NotLacking);
        }
        for s in c.surveys.iter_mut().take(5) {
            s.indicator_labels
                .insert(PovertyIndicator::Food, IndicatorLabel::Missing);
        }
        c.invalidate_index();
        assert_eq!(
            drop_missing_labels(&c, PovertyIndicator::Food)
                .surveys
                .len(),
            95
        );
        // Other tasks are unaffected.
        for s in c.surveys.iter_mut() {
            s.indicator_labels
                .insert(PovertyIndicator::Education, IndicatorLabel::Lacking);
        }
        assert_eq!(
            drop_missing_labels(&c, PovertyIndicator::Education)
                .surveys
                .len(),
            100
        );
        for s in c.surveys.iter_mut() {
            s.indicator_labels
                .insert(PovertyIndicator::Food, IndicatorLabel::Missing);
        }
        assert!(drop_missing_labels(&c, PovertyIndicator::Food)
            .households
            .is_empty());
    }
}
