//! Independent reference implementations used by the integration suites.
#![allow(dead_code)]

use povtriage::corpus::HouseholdId;
use povtriage::featurize::{Column, ColumnKind, Family, FeatureMatrix};
use povtriage::learners::{Boosted, Criterion, ModelState, Node, Tree};
use povtriage::triage::{rank, TriageRecord, TriageWeights};

/// (threshold, proportion flagged, precision, recall) by direct recount.
pub fn brute_pr(
    scores: &[f64],
    labels: &[bool],
    steps: usize,
) -> Vec<(f64, f64, Option<f64>, f64)> {
    let n = scores.len();
    let positives = labels.iter().filter(|&&l| l).count();
    (0..=steps)
        .map(|i| {
            let t = i as f64 / steps as f64;
            let mut flagged = 0usize;
            let mut hits = 0usize;
            for (s, l) in scores.iter().zip(labels) {
                if *s >= t {
                    flagged += 1;
                    if *l {
                        hits += 1;
                    }
                }
            }
            let precision = if flagged == 0 {
                None
            } else {
                Some(hits as f64 / flagged as f64)
            };
            (
                t,
                flagged as f64 / n as f64,
                precision,
                hits as f64 / positives as f64,
            )
        })
        .collect()
}

pub fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
    let p = rows.first().map_or(0, Vec::len);
    let cols = (0..p)
        .map(|j| Column::new(format!("x{j}"), Family::Transactional, ColumnKind::Numeric))
        .collect();
    FeatureMatrix::from_rows(
        (0..rows.len() as u32).map(HouseholdId).collect(),
        cols,
        rows.concat(),
    )
    .unwrap()
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleNode {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<OracleNode>,
        right: Box<OracleNode>,
    },
}

fn node_impurity(pos: usize, n: usize, c: Criterion) -> f64 {
    let p = pos as f64 / n as f64;
    match c {
        Criterion::Gini => 2.0 * p * (1.0 - p),
        Criterion::Entropy => [p, 1.0 - p]
            .iter()
            .filter(|&&x| x > 0.0)
            .map(|&x| -x * x.log2())
            .sum(),
    }
}

/// Exhaustive CART: every feature, every cut between distinct values;
/// lowest weighted impurity wins, near-equal costs go to the earlier
/// (feature, threshold).
pub fn oracle_tree(x: &[Vec<f64>], y: &[bool], rows: &[usize], c: Criterion) -> OracleNode {
    let n = rows.len();
    let pos = rows.iter().filter(|&&r| y[r]).count();
    let leaf = OracleNode::Leaf(pos as f64 / n as f64);
    if n < 2 {
        return leaf;
    }
    let parent = n as f64 * node_impurity(pos, n, c);
    let mut cands: Vec<(f64, usize, f64)> = Vec::new();
    for f in 0..x[0].len() {
        let mut vals: Vec<f64> = rows.iter().map(|&r| x[r][f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let mid = (w[0] + w[1]) / 2.0;
            let t = if mid < w[1] { mid } else { w[0] };
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][f] <= t);
            let cost = |s: &[usize]| {
                let p = s.iter().filter(|&&i| y[i]).count();
                s.len() as f64 * node_impurity(p, s.len(), c)
            };
            cands.push((cost(&l) + cost(&r), f, t));
        }
    }
    let Some(min) = cands.iter().map(|c| c.0).min_by(f64::total_cmp) else {
        return leaf;
    };
    if parent - min <= 1e-9 {
        return leaf;
    }
    let &(_, feature, threshold) = cands.iter().find(|c| c.0 <= min + 1e-9).unwrap();
    let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][feature] <= threshold);
    OracleNode::Split {
        feature,
        threshold,
        left: Box::new(oracle_tree(x, y, &l, c)),
        right: Box::new(oracle_tree(x, y, &r, c)),
    }
}

pub fn tree_as_oracle(t: &Tree, i: usize) -> OracleNode {
    match &t.nodes[i] {
        Node::Leaf { value, .. } => OracleNode::Leaf(*value),
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => OracleNode::Split {
            feature: *feature,
            threshold: *threshold,
            left: Box::new(tree_as_oracle(t, *left as usize)),
            right: Box::new(tree_as_oracle(t, *right as usize)),
        },
    }
}

pub fn model_as_oracle(state: &ModelState) -> OracleNode {
    match state {
        ModelState::Tree(t) => tree_as_oracle(t, 0),
        ModelState::Constant { probability } => OracleNode::Leaf(*probability),
        other => panic!("not a tree: {other:?}"),
    }
}

/// Mean logistic loss after each boosting stage, replayed from the stages
/// in fit order.
pub fn replay_gbm_loss(b: &Boosted, x: &[Vec<f64>], y: &[bool]) -> Vec<f64> {
    let loss = |f: &[f64]| {
        f.iter()
            .zip(y)
            .map(|(&f, &y)| {
                let z = if y { -f } else { f };
                z.max(0.0) + (-z.abs()).exp().ln_1p()
            })
            .sum::<f64>()
            / f.len() as f64
    };
    let mut f = vec![b.init; x.len()];
    let mut out = vec![loss(&f)];
    for s in &b.stages {
        for (fi, row) in f.iter_mut().zip(x) {
            *fi += s.scale * s.tree.predict(row);
        }
        out.push(loss(&f));
    }
    out
}

/// Failure message for the first violated ranking property, if any.
pub fn rank_property_violation(
    records: &[TriageRecord],
    w: &TriageWeights,
    scale: f64,
    bump: (usize, f64),
) -> Option<String> {
    let ranked = rank(records, w).ok()?;
    let ids = |r: &povtriage::triage::Ranking| -> Vec<HouseholdId> {
        r.records.iter().map(|x| x.record.household_id).collect()
    };
    // Fading partition.
    if let Some(first_faded) = ranked.records.iter().position(|r| r.record.faded) {
        if ranked.records[first_faded..]
            .iter()
            .any(|r| !r.record.faded)
        {
            return Some("a non-faded record follows a faded one".into());
        }
    }
    // Positive scaling leaves the order alone.
    let scaled = TriageWeights {
        w_prob: w.w_prob * scale,
        w_discrepancy: w.w_discrepancy * scale,
        w_proximity: w.w_proximity * scale,
        tau: w.tau,
    };
    if ids(&rank(records, &scaled).unwrap()) != ids(&ranked) {
        return Some(format!("scaling by {scale} changed the order"));
    }
    // Raising one probability never lowers its place among non-faded rows.
    if w.w_prob > 0.0 && !records.is_empty() {
        let i = bump.0 % records.len();
        let mut bumped = records.to_vec();
        bumped[i].p_underreport = (bumped[i].p_underreport + bump.1).min(1.0);
        let target = records[i].household_id;
        let place = |r: &povtriage::triage::Ranking| {
            r.records
                .iter()
                .filter(|x| !x.record.faded)
                .position(|x| x.record.household_id == target)
        };
        let after = rank(&bumped, w).unwrap();
        if let (Some(a), Some(b)) = (place(&ranked), place(&after)) {
            if b > a {
                return Some(format!("raising p of {target} moved it from {a} to {b}"));
            }
        }
    }
    None
}

use std::collections::BTreeSet;

use povtriage::corpus::{Corpus, IndicatorLabel, VerificationOutcome};

/// The corpus with every label of `held` inverted: indicator labels swap
/// lacking and not lacking, verification records gain or lose their
/// discrepancies.
pub fn flip_labels(corpus: &Corpus, held: &BTreeSet<HouseholdId>) -> Corpus {
    let mut c = corpus.clone();
    for s in c
        .surveys
        .iter_mut()
        .filter(|s| held.contains(&s.household_id))
    {
        for l in s.indicator_labels.values_mut() {
            *l = match *l {
                IndicatorLabel::Lacking => IndicatorLabel::NotLacking,
                IndicatorLabel::NotLacking => IndicatorLabel::Lacking,
                IndicatorLabel::Missing => IndicatorLabel::Missing,
            };
        }
    }
    for v in c
        .verifications
        .iter_mut()
        .filter(|v| held.contains(&v.household_id))
    {
        if v.any_discrepancy() {
            v.entries
                .values_mut()
                .for_each(|e| *e = VerificationOutcome::Match);
        } else if let Some(e) = v.entries.values_mut().next() {
            *e = VerificationOutcome::UnderReported;
        }
    }
    c
}

pub mod strategies {
    use proptest::prelude::*;

    use povtriage::corpus::HouseholdId;
    use povtriage::triage::{TriageRecord, TriageWeights};

    pub fn score() -> impl Strategy<Value = f64> {
        // Grid values exercise the `>=` boundary.
        prop_oneof![
            (0u32..=100).prop_map(|i| f64::from(i) / 100.0),
            0.0..=1.0f64
        ]
    }

    pub fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        prop::collection::vec((score(), any::<bool>()), 1..200).prop_filter_map(
            "needs a positive",
            |v| {
                let (s, l): (Vec<f64>, Vec<bool>) = v.into_iter().unzip();
                l.contains(&true).then_some((s, l))
            },
        )
    }

    pub fn small_instance(max_rows: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<bool>)> {
        (1usize..=4, 2usize..=max_rows).prop_flat_map(|(p, n)| {
            let cell = prop_oneof![(0u8..4).prop_map(f64::from), -2.0..2.0f64];
            (
                prop::collection::vec(prop::collection::vec(cell, p), n),
                prop::collection::vec(any::<bool>(), n),
            )
        })
    }

    pub fn record() -> impl Strategy<Value = TriageRecord> {
        (
            0.0..=1.0f64,
            0.0..8_000.0f64,
            0.0..8_000.0f64,
            prop_oneof![Just(2_000.0), Just(3_000.0)],
        )
            .prop_map(|(p, est, rep, lbm)| TriageRecord::new(HouseholdId(0), p, est, rep, lbm))
    }

    pub fn records() -> impl Strategy<Value = Vec<TriageRecord>> {
        prop::collection::vec(record(), 0..40).prop_map(|mut v| {
            for (i, r) in v.iter_mut().enumerate() {
                r.household_id = HouseholdId(i as u32 * 7 % 101);
            }
            v
        })
    }

    pub fn weights() -> impl Strategy<Value = TriageWeights> {
        (
            0.0..2.0f64,
            0.0..2.0f64,
            0.0..2.0f64,
            prop::option::of(50.0..2_000.0f64),
        )
            .prop_filter("some weight positive", |w| w.0 + w.1 + w.2 > 0.0)
            .prop_map(|(a, b, c, tau)| TriageWeights {
                w_prob: a,
                w_discrepancy: b,
                w_proximity: c,
                tau,
            })
    }
}

use povtriage::corpus::RegionId;
use povtriage::eval::FoldAssignment;
use povtriage::learners::ModelSpec;
use povtriage::pipeline::{average_rows, task_data, TrainedPipeline};
use povtriage::{FeatureSet, Task};

/// Labelled rows of `task` in fold `f`.
pub fn held_out(
    c: &Corpus,
    task: Task,
    region: RegionId,
    folds: &FoldAssignment,
    f: usize,
) -> BTreeSet<HouseholdId> {
    task_data(c, task, Some(region))
        .ids
        .into_iter()
        .filter(|&id| folds.fold_of(id) == Some(f))
        .collect()
}

/// Serialized averages, imputation statistics and model fit for fold `f`.
pub fn fold_artifacts(
    c: &Corpus,
    task: Task,
    spec: &ModelSpec,
    region: RegionId,
    folds: &FoldAssignment,
    f: usize,
) -> [String; 3] {
    let d = task_data(c, task, Some(region));
    let (mut train, mut y, mut test) = (vec![], vec![], vec![]);
    for (&id, &l) in d.ids.iter().zip(&d.labels) {
        if folds.fold_of(id) == Some(f) {
            test.push(id);
        } else {
            train.push(id);
            y.push(l);
        }
    }
    let avg = average_rows(c, task, Some(region), &train, &test);
    let p = TrainedPipeline::fit(
        c,
        task,
        FeatureSet::Combined,
        Some(region),
        spec,
        &train,
        &y,
        &avg,
    )
    .unwrap();
    [
        serde_json::to_string(&p.averages).unwrap(),
        serde_json::to_string(&p.preprocessor).unwrap(),
        p.model.to_json(),
    ]
}
