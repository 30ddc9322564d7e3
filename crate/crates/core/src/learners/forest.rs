use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{Classification, GrowParams, Grower, Tree};
use super::{Criterion, ForestParams};
use crate::util::{mix_seed, rng_stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn predict(&self, row: &[f64]) -> f64 {
        if self.trees.is_empty() {
            return 0.0;
        }
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }
}

fn grow_one(
    cols: &[Vec<f64>],
    labels: &[bool],
    criterion: Criterion,
    params: &GrowParams,
    seed: u64,
    index: u64,
) -> (Tree, Vec<f64>) {
    let n = labels.len();
    let mut rng = rng_stream(mix_seed(seed, index), 0);
    let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let obj = Classification { labels, criterion };
    Grower::new(cols, &obj, params, Some(&mut rng)).grow(rows)
}

/// Bootstrap forest; tree `i` draws everything from a stream keyed on
/// `(seed, i)`, so the result does not depend on thread scheduling.
pub(crate) fn fit_forest(
    cols: &[Vec<f64>],
    labels: &[bool],
    p: &ForestParams,
) -> (Forest, Vec<f64>) {
    let n_features = cols.len();
    let params = GrowParams {
        max_depth: p.max_depth,
        min_leaf: p.min_leaf,
        max_features: Some(p.max_features.resolve(n_features)),
    };
    let one = |i: usize| grow_one(cols, labels, p.criterion, &params, p.seed, i as u64);

    #[cfg(feature = "parallel")]
    let grown: Vec<(Tree, Vec<f64>)> = {
        use rayon::prelude::*;
        (0..p.trees).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let grown: Vec<(Tree, Vec<f64>)> = (0..p.trees).map(one).collect();

    let mut importance = vec![0.0; n_features];
    let mut trees = Vec::with_capacity(grown.len());
    for (t, imp) in grown {
        for (a, b) in importance.iter_mut().zip(imp) {
            *a += b;
        }
        trees.push(t);
    }
    (Forest { trees }, importance)
}
