//! Probability classifiers written from scratch: constant baseline, CART,
//! bagged forest, Newton-boosted trees and k nearest neighbours.

mod forest;
mod gbm;
mod impurity;
mod knn;
mod tree;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::featurize::FeatureMatrix;

pub use forest::Forest;
pub use gbm::{log_loss, Boosted, Stage};
pub use impurity::{impurity, impurity_from_counts, Criterion};
pub use knn::Neighbors;
pub use tree::{Node, Tree};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LearnerError {
    #[error("no training rows")]
    Empty,
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("feature matrix still has missing cells; preprocess it first")]
    MissingValues,
    #[error("feature schema mismatch at column `{column}`")]
    SchemaMismatch { column: String },
    #[error("importances are not defined for {0} models")]
    Unsupported(&'static str),
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubsample {
    #[default]
    Sqrt,
    All,
    Count(usize),
}

impl FeatureSubsample {
    pub fn resolve(self, p: usize) -> usize {
        match self {
            FeatureSubsample::Sqrt => ((p as f64).sqrt().round() as usize).max(1),
            FeatureSubsample::All => p.max(1),
            FeatureSubsample::Count(k) => k.clamp(1, p.max(1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            criterion: Criterion::Gini,
            max_depth: None,
            min_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub trees: usize,
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub max_features: FeatureSubsample,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 100,
            criterion: Criterion::Gini,
            max_depth: None,
            min_leaf: 5,
            max_features: FeatureSubsample::Sqrt,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbmParams {
    pub estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for GbmParams {
    fn default() -> Self {
        GbmParams {
            estimators: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_leaf: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub neighbors: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { neighbors: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Majority,
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
    Gbm(GbmParams),
    Knn(KnnParams),
}

impl ModelSpec {
    pub fn rf(trees: usize) -> Self {
        ModelSpec::RandomForest(ForestParams {
            trees,
            ..Default::default()
        })
    }

    pub fn gbm(estimators: usize) -> Self {
        ModelSpec::Gbm(GbmParams {
            estimators,
            ..Default::default()
        })
    }

    pub fn knn(neighbors: usize) -> Self {
        ModelSpec::Knn(KnnParams { neighbors })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::Majority => "majority",
            ModelSpec::DecisionTree(_) => "decision_tree",
            ModelSpec::RandomForest(_) => "random_forest",
            ModelSpec::Gbm(_) => "gbm",
            ModelSpec::Knn(_) => "knn",
        }
    }

    /// Short stable label used in job ids and grid exports.
    pub fn id(&self) -> String {
        match self {
            ModelSpec::Majority => "majority".into(),
            ModelSpec::DecisionTree(p) => format!("tree-{}", p.criterion.name()),
            ModelSpec::RandomForest(p) => format!("rf-{}-{}", p.trees, p.criterion.name()),
            ModelSpec::Gbm(p) => format!("gbm-{}", p.estimators),
            ModelSpec::Knn(p) => format!("knn-{}", p.neighbors),
        }
    }

    /// Same spec with its sampler reseeded; a no-op for deterministic kinds.
    pub fn with_seed(&self, seed: u64) -> Self {
        match self {
            ModelSpec::RandomForest(p) => {
                ModelSpec::RandomForest(ForestParams { seed, ..p.clone() })
            }
            other => other.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        let bad = |m: &str| Err(LearnerError::InvalidSpec(m.to_string()));
        match self {
            ModelSpec::Majority => Ok(()),
            ModelSpec::DecisionTree(p) if p.min_leaf == 0 => bad("min_leaf must be positive"),
            ModelSpec::RandomForest(p) if p.trees == 0 => bad("trees must be positive"),
            ModelSpec::RandomForest(p) if p.min_leaf == 0 => bad("min_leaf must be positive"),
            ModelSpec::Gbm(p) if !(p.learning_rate > 0.0 && p.learning_rate <= 1.0) => {
                bad("learning_rate must be in (0, 1]")
            }
            ModelSpec::Gbm(p) if p.min_leaf == 0 || p.max_depth == 0 => {
                bad("max_depth and min_leaf must be positive")
            }
            ModelSpec::Knn(p) if p.neighbors == 0 => bad("neighbors must be positive"),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl std::str::FromStr for ModelSpec {
    type Err = String;
    /// Parses the short ids produced by [`ModelSpec::id`].
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.trim().split('-').collect();
        let num = |i: usize| -> Result<usize, String> {
            parts
                .get(i)
                .ok_or_else(|| format!("model `{s}` is missing a count"))?
                .parse()
                .map_err(|_| format!("bad count in model `{s}`"))
        };
        let crit = |i: usize| -> Result<Criterion, String> {
            parts.get(i).map_or(Ok(Criterion::Gini), |c| c.parse())
        };
        match parts[0] {
            "majority" => Ok(ModelSpec::Majority),
            "tree" => Ok(ModelSpec::DecisionTree(TreeParams {
                criterion: crit(1)?,
                ..Default::default()
            })),
            "rf" => Ok(ModelSpec::RandomForest(ForestParams {
                trees: num(1)?,
                criterion: crit(2)?,
                ..Default::default()
            })),
            "gbm" => Ok(ModelSpec::gbm(num(1)?)),
            "knn" => Ok(ModelSpec::knn(num(1)?)),
            _ => Err(format!("unknown model `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelState {
    Constant { probability: f64 },
    Tree(Tree),
    Forest(Forest),
    Gbm(Boosted),
    Knn(Neighbors),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub columns: Vec<String>,
    pub fingerprint: String,
    pub n_train: usize,
    pub prevalence: f64,
    /// Set when the labels had a single class and a constant model was fit
    /// in place of the requested one.
    pub constant_fallback: bool,
    pub state: ModelState,
    /// Unnormalized impurity decrease (or boosting gain) per column.
    raw_importance: Vec<f64>,
}

/// Column name and share of total importance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub entries: Vec<(String, f64)>,
}

impl ImportanceReport {
    /// Highest first; equal values by name.
    pub fn ranked(&self) -> Vec<(String, f64)> {
        let mut v = self.entries.clone();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    }

    pub fn get(&self, column: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == column).map(|e| e.1)
    }
}

/// Fit `spec` on a preprocessed matrix. Rows are put in household-id order
/// first, so the fitted model does not depend on the incoming row order.
pub fn fit(spec: &ModelSpec, x: &FeatureMatrix, y: &[bool]) -> Result<TrainedModel, LearnerError> {
    spec.validate()?;
    if x.n_rows() == 0 {
        return Err(LearnerError::Empty);
    }
    if x.n_rows() != y.len() {
        return Err(LearnerError::LengthMismatch {
            rows: x.n_rows(),
            labels: y.len(),
        });
    }
    if x.has_missing() {
        return Err(LearnerError::MissingValues);
    }
    let mut order: Vec<usize> = (0..x.n_rows()).collect();
    order.sort_by_key(|&i| (x.row_ids[i], i));
    let canonical = x.select_rows(&order);
    let labels: Vec<bool> = order.iter().map(|&i| y[i]).collect();
    let cols = tree::to_columns(canonical.values(), canonical.n_rows(), canonical.n_cols());

    let n = labels.len();
    let positives = labels.iter().filter(|&&l| l).count();
    let prevalence = positives as f64 / n as f64;
    let single_class = positives == 0 || positives == n;
    let mut raw_importance = vec![0.0; x.n_cols()];
    let state = if matches!(spec, ModelSpec::Majority) {
        ModelState::Constant {
            probability: prevalence,
        }
    } else if single_class {
        log::warn!(
            "{}: all {n} training labels are {}; fitting a constant model",
            spec.id(),
            positives > 0
        );
        ModelState::Constant {
            probability: prevalence,
        }
    } else {
        match spec {
            ModelSpec::Majority => unreachable!(),
            ModelSpec::DecisionTree(p) => {
                let obj = tree::Classification {
                    labels: &labels,
                    criterion: p.criterion,
                };
                let params = tree::GrowParams {
                    max_depth: p.max_depth,
                    min_leaf: p.min_leaf,
                    max_features: None,
                };
                let orders = tree::presort(&cols);
                let (t, imp) = tree::Grower::new(&cols, &obj, &params, None)
                    .with_presorted(&orders)
                    .grow((0..n).collect());
                raw_importance = imp;
                ModelState::Tree(t)
            }
            ModelSpec::RandomForest(p) => {
                let (f, imp) = forest::fit_forest(&cols, &labels, p);
                raw_importance = imp;
                ModelState::Forest(f)
            }
            ModelSpec::Gbm(p) => {
                let (b, imp) = gbm::fit_gbm(&cols, &labels, p);
                raw_importance = imp;
                ModelState::Gbm(b)
            }
            ModelSpec::Knn(p) => ModelState::Knn(Neighbors::fit(&cols, &labels, p.neighbors)),
        }
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        columns: x.column_names(),
        fingerprint: x.fingerprint(),
        n_train: n,
        prevalence,
        constant_fallback: single_class && !matches!(spec, ModelSpec::Majority),
        state,
        raw_importance,
    })
}

impl TrainedModel {
    fn check_schema(&self, x: &FeatureMatrix) -> Result<(), LearnerError> {
        if x.fingerprint() == self.fingerprint {
            return Ok(());
        }
        let names = x.column_names();
        let column = names
            .iter()
            .zip(&self.columns)
            .find(|(a, b)| a != b)
            .map(|(a, _)| a.clone())
            .or_else(|| {
                // Same names; differing length or kinds.
                names
                    .get(self.columns.len())
                    .or(self.columns.get(names.len()))
                    .cloned()
            })
            .unwrap_or_else(|| names.first().cloned().unwrap_or_default());
        Err(LearnerError::SchemaMismatch { column })
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.state {
            ModelState::Constant { probability } => *probability,
            ModelState::Tree(t) => t.predict(row),
            ModelState::Forest(f) => f.predict(row),
            ModelState::Gbm(b) => b.predict(row),
            ModelState::Knn(k) => k.predict(row),
        }
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>, LearnerError> {
        self.check_schema(x)?;
        if x.has_missing() {
            return Err(LearnerError::MissingValues);
        }
        let rows = 0..x.n_rows();
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            Ok(rows
                .into_par_iter()
                .map(|r| self.predict_row(x.row(r)))
                .collect())
        }
        #[cfg(not(feature = "parallel"))]
        Ok(rows.map(|r| self.predict_row(x.row(r))).collect())
    }

    pub fn importances(&self) -> Result<ImportanceReport, LearnerError> {
        match self.spec {
            ModelSpec::Majority => return Err(LearnerError::Unsupported("majority")),
            ModelSpec::Knn(_) => return Err(LearnerError::Unsupported("knn")),
            _ => {}
        }
        let total: f64 = self.raw_importance.iter().sum();
        let entries = self
            .columns
            .iter()
            .zip(&self.raw_importance)
            .map(|(c, &v)| (c.clone(), if total > 0.0 { v / total } else { 0.0 }))
            .collect();
        Ok(ImportanceReport { entries })
    }

    /// Per-stage training loss for boosted models.
    pub fn training_loss(&self) -> Option<&[f64]> {
        match &self.state {
            ModelState::Gbm(b) => Some(&b.train_loss),
            _ => None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("models serialize")
    }

    pub fn from_json(s: &str) -> serde_json::Result<TrainedModel> {
        serde_json::from_str(s)
    }
}

pub fn importances(model: &TrainedModel) -> Result<ImportanceReport, LearnerError> {
    model.importances()
}

pub fn predict_proba(model: &TrainedModel, x: &FeatureMatrix) -> Result<Vec<f64>, LearnerError> {
    model.predict_proba(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::HouseholdId;
    use crate::featurize::{Column, ColumnKind, Family};
    use crate::util::rng_stream;
    use rand::Rng;

    fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
        let p = rows.first().map_or(0, Vec::len);
        FeatureMatrix::from_rows(
            (0..rows.len() as u32).map(HouseholdId).collect(),
            (0..p)
                .map(|j| Column::new(format!("f{j}"), Family::Survey, ColumnKind::Numeric))
                .collect(),
            rows.concat(),
        )
        .unwrap()
    }

    fn noisy(n: usize, seed: u64) -> (FeatureMatrix, Vec<bool>) {
        let mut rng = rng_stream(seed, 0);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.random();
            let b: f64 = rng.random();
            let c: f64 = rng.random();
            rows.push(vec![a, b, c]);
            y.push(rng.random::<f64>() < 0.2 + 0.6 * a * b);
        }
        (matrix(&rows), y)
    }

    #[test]
    fn gbm_with_no_estimators_is_prevalence() {
        let (x, y) = noisy(50, 1);
        let m = fit(&ModelSpec::gbm(0), &x, &y).unwrap();
        let prev = y.iter().filter(|&&l| l).count() as f64 / 50.0;
        assert!(m.predict_proba(&x).unwrap().iter().all(|&p| p == prev));
    }

    #[test]
    fn tree_separates_separable_data() {
        let x = matrix(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![5.0]]);
        let y = [false, false, true, true, true];
        let m = fit(&ModelSpec::DecisionTree(TreeParams::default()), &x, &y).unwrap();
        let p = m.predict_proba(&x).unwrap();
        assert_eq!(p, vec![0.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn forest_is_deterministic_per_seed() {
        let (x, y) = noisy(120, 2);
        let spec = ModelSpec::rf(50).with_seed(9);
        let a = fit(&spec, &x, &y).unwrap().predict_proba(&x).unwrap();
        let b = fit(&spec, &x, &y).unwrap().predict_proba(&x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn knn_single_neighbour_recovers_label() {
        let x = matrix(&[vec![0.0, 0.0], vec![1.0, 5.0], vec![3.0, 1.0]]);
        let y = [true, false, true];
        let m = fit(&ModelSpec::knn(1), &x, &y).unwrap();
        assert_eq!(m.predict_proba(&x).unwrap(), vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn knn_includes_ties_at_kth_distance() {
        let x = matrix(&[vec![-1.0], vec![1.0], vec![0.0]]);
        let y = [true, false, true];
        let q = matrix(&[vec![0.0]]);
        let m = fit(&ModelSpec::knn(1), &x, &y).unwrap();
        assert_eq!(m.predict_proba(&q).unwrap(), vec![1.0]);
        // Second nearest is a tie between -1 and 1; both are counted.
        let m = fit(&ModelSpec::knn(2), &x, &y).unwrap();
        assert_eq!(m.predict_proba(&q).unwrap(), vec![2.0 / 3.0]);
    }

    #[test]
    fn majority_is_constant_prevalence() {
        let x = matrix(&vec![vec![0.0]; 10]);
        let y: Vec<bool> = (0..10).map(|i| i < 7).collect();
        let m = fit(&ModelSpec::Majority, &x, &y).unwrap();
        assert!(m.predict_proba(&x).unwrap().iter().all(|&p| p == 0.7));
        assert!(m.importances().is_err());
    }

    #[test]
    fn single_class_falls_back_to_constant() {
        let (x, _) = noisy(20, 3);
        let m = fit(&ModelSpec::rf(10), &x, &[true; 20]).unwrap();
        assert!(m.constant_fallback);
        assert!(m.predict_proba(&x).unwrap().iter().all(|&p| p == 1.0));
    }

    #[test]
    fn schema_mismatch_names_column() {
        let (x, y) = noisy(30, 4);
        let m = fit(&ModelSpec::gbm(5), &x, &y).unwrap();
        let mut other = x.clone();
        other.columns[1].name = "renamed".into();
        assert_eq!(
            m.predict_proba(&other),
            Err(LearnerError::SchemaMismatch {
                column: "renamed".into()
            })
        );
    }

    #[test]
    fn single_split_importance_is_one() {
        let x = matrix(&[
            vec![1.0, 7.0],
            vec![2.0, 7.0],
            vec![3.0, 7.0],
            vec![4.0, 7.0],
        ]);
        let y = [false, false, true, true];
        let m = fit(&ModelSpec::DecisionTree(TreeParams::default()), &x, &y).unwrap();
        let imp = m.importances().unwrap();
        assert_eq!(imp.get("f0"), Some(1.0));
        assert_eq!(imp.get("f1"), Some(0.0));
    }

    #[test]
    fn gbm_loss_never_increases_and_output_is_open_interval() {
        let (x, y) = noisy(200, 5);
        let m = fit(&ModelSpec::gbm(40), &x, &y).unwrap();
        let loss = m.training_loss().unwrap();
        assert_eq!(loss.len(), 41);
        assert!(loss.windows(2).all(|w| w[1] <= w[0]));
        assert!(m
            .predict_proba(&x)
            .unwrap()
            .iter()
            .all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn model_json_round_trip_is_exact() {
        let (x, y) = noisy(80, 6);
        for spec in [
            ModelSpec::rf(5),
            ModelSpec::gbm(5),
            ModelSpec::knn(3),
            ModelSpec::Majority,
        ] {
            let m = fit(&spec, &x, &y).unwrap();
            let back = TrainedModel::from_json(&m.to_json()).unwrap();
            assert_eq!(back, m);
            assert_eq!(
                back.predict_proba(&x).unwrap(),
                m.predict_proba(&x).unwrap()
            );
        }
    }

    #[test]
    fn spec_ids_parse_back() {
        for s in [
            "majority",
            "tree-entropy",
            "rf-100-gini",
            "gbm-150",
            "knn-25",
        ] {
            assert_eq!(s.parse::<ModelSpec>().unwrap().id(), s);
        }
        assert!("svm".parse::<ModelSpec>().is_err());
        assert!(ModelSpec::knn(0).validate().is_err());
    }
}
