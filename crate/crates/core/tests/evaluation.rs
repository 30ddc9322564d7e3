mod common;

use std::collections::BTreeSet;

use common::{flip_labels, fold_artifacts, held_out};
use povtriage::corpus::{
    apply_locality_filter, generate_corpus, Corpus, CorpusConfig, HouseholdId, IndicatorLabel,
    PovertyIndicator, RegionId,
};
use povtriage::eval::{cv_rows_csv, make_grouped_folds, run_cv, FoldAssignment};
use povtriage::learners::ModelSpec;
use povtriage::pipeline::task_data;
use povtriage::{FeatureSet, Task};

const EDUCATION: Task = Task::Indicator(PovertyIndicator::Education);

fn corpus() -> Corpus {
    apply_locality_filter(
        &generate_corpus(&CorpusConfig {
            n_households: 2_500,
            n_regions: 2,
            n_localities: 16,
            seed: 11,
            ..Default::default()
        })
        .unwrap(),
    )
}

fn folds(c: &Corpus, r: RegionId) -> FoldAssignment {
    make_grouped_folds(c.households_in(r), 5, 4).unwrap()
}

fn artifacts(c: &Corpus, task: Task, spec: &ModelSpec, f: usize) -> [String; 3] {
    fold_artifacts(c, task, spec, RegionId(1), &folds(c, RegionId(1)), f)
}

fn held(c: &Corpus, task: Task, f: usize) -> BTreeSet<HouseholdId> {
    held_out(c, task, RegionId(1), &folds(c, RegionId(1)), f)
}

#[test]
fn flipping_held_out_labels_changes_no_training_artifact() {
    let c = corpus();
    for (task, spec) in [
        (EDUCATION, ModelSpec::gbm(20)),
        (EDUCATION, ModelSpec::rf(10)),
        (Task::Underreporting, ModelSpec::rf(10)),
        (
            Task::Indicator(PovertyIndicator::BasicServices),
            ModelSpec::knn(12),
        ),
    ] {
        let flipped = flip_labels(&c, &held(&c, task, 2));
        assert_ne!(flipped, c);
        let a = artifacts(&c, task, &spec, 2);
        let b = artifacts(&flipped, task, &spec, 2);
        assert!(a[0] == b[0], "{task} averages moved");
        assert!(a[1] == b[1], "{task} imputation statistics moved");
        assert!(a[2] == b[2], "{task} {} model moved", spec.id());
    }
}

#[test]
fn held_out_scores_ignore_their_own_labels() {
    let c = corpus();
    let flipped = flip_labels(&c, &held(&c, EDUCATION, 0));
    let fa = folds(&c, RegionId(1));
    let run = |c: &Corpus| {
        run_cv(
            EDUCATION,
            RegionId(1),
            &ModelSpec::gbm(20),
            FeatureSet::Combined,
            &fa,
            c,
            0.01,
        )
        .unwrap()
    };
    let (a, b) = (run(&c), run(&flipped));
    let fold0 = |r: &povtriage::eval::CvResult| -> Vec<(HouseholdId, f64)> {
        r.archive
            .iter()
            .filter(|x| x.fold == 0)
            .map(|x| (x.household_id, x.score))
            .collect()
    };
    assert!(!fold0(&a).is_empty());
    assert_eq!(fold0(&a), fold0(&b));
}

#[test]
fn single_class_region_is_marked_degenerate() {
    let mut c = corpus();
    let r1: BTreeSet<HouseholdId> = c.households_in(RegionId(1)).iter().copied().collect();
    for s in c
        .surveys
        .iter_mut()
        .filter(|s| r1.contains(&s.household_id))
    {
        s.indicator_labels
            .insert(PovertyIndicator::Education, IndicatorLabel::NotLacking);
    }
    let res = run_cv(
        EDUCATION,
        RegionId(1),
        &ModelSpec::gbm(5),
        FeatureSet::Geographic,
        &folds(&c, RegionId(1)),
        &c,
        0.01,
    )
    .unwrap();
    assert!(res.is_degenerate());
    assert!(res.pooled.is_none() && res.folds.is_empty());
    let csv = cv_rows_csv(&res);
    assert_eq!(csv.lines().count(), 2, "{csv}");
    assert!(csv
        .lines()
        .nth(1)
        .unwrap()
        .contains("NA,NA,NA,NA,degenerate"));

    let other = run_cv(
        EDUCATION,
        RegionId(2),
        &ModelSpec::gbm(5),
        FeatureSet::Geographic,
        &folds(&c, RegionId(2)),
        &c,
        0.01,
    )
    .unwrap();
    assert!(!other.is_degenerate());
}

#[test]
fn cv_stays_in_region_and_full_flagging_is_prevalence() {
    let c = corpus();
    for r in c.regions() {
        for spec in [ModelSpec::Majority, ModelSpec::gbm(10), ModelSpec::knn(12)] {
            for task in [EDUCATION, Task::Underreporting] {
                let res = run_cv(
                    task,
                    r,
                    &spec,
                    FeatureSet::Combined,
                    &folds(&c, r),
                    &c,
                    0.01,
                )
                .unwrap();
                assert_eq!(res.training_regions, BTreeSet::from([r]));
                let pooled = res.pooled.as_ref().unwrap();
                let all = pooled.points.iter().find(|p| p.threshold == 0.0).unwrap();
                assert_eq!(all.proportion_flagged, 1.0);
                assert_eq!(all.precision, Some(res.prevalence));
                for f in res.folds.iter().filter_map(|f| f.curve.as_ref()) {
                    assert_eq!(f.points[0].precision, Some(f.prevalence));
                }
            }
        }
    }
}

#[test]
fn archive_covers_each_labelled_row_once() {
    let c = corpus();
    let r = RegionId(2);
    let res = run_cv(
        EDUCATION,
        r,
        &ModelSpec::rf(10),
        FeatureSet::Transactional,
        &folds(&c, r),
        &c,
        0.01,
    )
    .unwrap();
    let d = task_data(&c, EDUCATION, Some(r));
    let ids: Vec<HouseholdId> = res.archive.iter().map(|a| a.household_id).collect();
    assert_eq!(ids, d.ids);
}
