//! CART growth shared by the single tree, the forest and boosting.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::impurity::{impurity_from_counts, Criterion};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
        samples: u32,
    },
}

/// Rows with `x[feature] <= threshold` go left. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    /// Prediction for row `i` of a column-major matrix.
    pub(crate) fn predict_at(&self, cols: &[Vec<f64>], i: usize) -> f64 {
        let mut n = 0usize;
        loop {
            match &self.nodes[n] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    n = if cols[*feature][i] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + go(t, *left as usize).max(go(t, *right as usize))
                }
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

/// What a split minimizes and what a leaf predicts.
pub(crate) trait Objective {
    type Stats: Copy + Default;
    fn row_stats(&self, row: usize) -> Self::Stats;
    fn add(a: Self::Stats, b: Self::Stats) -> Self::Stats;
    fn sub(a: Self::Stats, b: Self::Stats) -> Self::Stats;
    /// Node cost; children are compared by the sum of their costs.
    fn cost(&self, s: Self::Stats, n: usize) -> f64;
    fn leaf_value(&self, s: Self::Stats, rows: &[usize]) -> f64;
}

pub(crate) struct Classification<'a> {
    pub labels: &'a [bool],
    pub criterion: Criterion,
}

impl Objective for Classification<'_> {
    type Stats = u32;
    fn row_stats(&self, row: usize) -> u32 {
        u32::from(self.labels[row])
    }
    fn add(a: u32, b: u32) -> u32 {
        a + b
    }
    fn sub(a: u32, b: u32) -> u32 {
        a - b
    }
    fn cost(&self, positives: u32, n: usize) -> f64 {
        n as f64 * impurity_from_counts(positives, n as u32, self.criterion)
    }
    fn leaf_value(&self, positives: u32, rows: &[usize]) -> f64 {
        f64::from(positives) / rows.len() as f64
    }
}

/// Squared error on residuals with Newton leaf values.
pub(crate) struct Regression<'a> {
    pub residuals: &'a [f64],
    pub hessians: &'a [f64],
}

impl Objective for Regression<'_> {
    type Stats = f64;
    fn row_stats(&self, row: usize) -> f64 {
        self.residuals[row]
    }
    fn add(a: f64, b: f64) -> f64 {
        a + b
    }
    fn sub(a: f64, b: f64) -> f64 {
        a - b
    }
    fn cost(&self, sum: f64, n: usize) -> f64 {
        -(sum * sum) / n as f64
    }
    fn leaf_value(&self, sum: f64, rows: &[usize]) -> f64 {
        let h: f64 = rows.iter().map(|&r| self.hessians[r]).sum();
        (sum / h.max(1e-12)).clamp(-10.0, 10.0)
    }
}

pub(crate) struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features examined per split; all when `None`.
    pub max_features: Option<usize>,
}

const MIN_GAIN: f64 = 1e-12;
/// Candidate costs closer than this count as tied; the earlier (feature,
/// threshold) candidate is kept.
const TIE_EPS: f64 = 1e-12;

pub(crate) struct Grower<'a, O: Objective> {
    cols: &'a [Vec<f64>],
    obj: &'a O,
    params: &'a GrowParams,
    rng: Option<&'a mut ChaCha8Rng>,
    nodes: Vec<Node>,
    /// Total cost decrease per feature.
    pub importance: Vec<f64>,
    pairs: Vec<(f64, usize)>,
    /// Row indices sorted by each feature; only valid when the grown row
    /// set has no repeats.
    presorted: Option<&'a [Vec<usize>]>,
    in_node: Vec<bool>,
}

struct Best {
    cost: f64,
    feature: usize,
    threshold: f64,
}

impl<'a, O: Objective> Grower<'a, O> {
    pub fn new(
        cols: &'a [Vec<f64>],
        obj: &'a O,
        params: &'a GrowParams,
        rng: Option<&'a mut ChaCha8Rng>,
    ) -> Self {
        Grower {
            cols,
            obj,
            params,
            rng,
            nodes: Vec::new(),
            importance: vec![0.0; cols.len()],
            pairs: Vec::new(),
            presorted: None,
            in_node: Vec::new(),
        }
    }

    pub fn with_presorted(mut self, orders: &'a [Vec<usize>]) -> Self {
        self.in_node = vec![false; orders.first().map_or(0, Vec::len)];
        self.presorted = Some(orders);
        self
    }

    /// Grow from `rows` (indices may repeat, as in a bootstrap sample).
    pub fn grow(mut self, rows: Vec<usize>) -> (Tree, Vec<f64>) {
        self.node(rows, 0);
        (Tree { nodes: self.nodes }, self.importance)
    }

    fn node(&mut self, rows: Vec<usize>, depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        let total = rows.iter().fold(O::Stats::default(), |s, &r| {
            O::add(s, self.obj.row_stats(r))
        });
        self.nodes.push(Node::Leaf {
            value: self.obj.leaf_value(total, &rows),
            samples: rows.len() as u32,
        });
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if !depth_ok || rows.len() < 2 * self.params.min_leaf.max(1) {
            return id;
        }
        let parent = self.obj.cost(total, rows.len());
        let Some(best) = self.best_split(&rows, total) else {
            return id;
        };
        if parent - best.cost <= MIN_GAIN {
            return id;
        }
        self.importance[best.feature] += parent - best.cost;
        let col = &self.cols[best.feature];
        let (l, r): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&i| col[i] <= best.threshold);
        let left = self.node(l, depth + 1);
        let right = self.node(r, depth + 1);
        self.nodes[id as usize] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.cols.len();
        match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < p => {
                let mut f = sample(rng, p, m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        }
    }

    fn best_split(&mut self, rows: &[usize], total: O::Stats) -> Option<Best> {
        let n = rows.len();
        let min_leaf = self.params.min_leaf.max(1);
        let mut best: Option<Best> = None;
        let mut pairs = std::mem::take(&mut self.pairs);
        // Filtering a presorted order beats sorting once the node holds a
        // sizeable share of all rows.
        let use_presort = self
            .presorted
            .and_then(|o| o.first())
            .is_some_and(|o| n * (usize::BITS - n.leading_zeros()) as usize >= o.len());
        if use_presort {
            for &r in rows {
                self.in_node[r] = true;
            }
        }
        for f in self.candidate_features() {
            let col = &self.cols[f];
            pairs.clear();
            match self.presorted {
                Some(orders) if use_presort => pairs.extend(
                    orders[f]
                        .iter()
                        .filter(|&&r| self.in_node[r])
                        .map(|&r| (col[r], r)),
                ),
                _ => {
                    pairs.extend(rows.iter().map(|&r| (col[r], r)));
                    pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                }
            }
            if pairs[0].0 == pairs[n - 1].0 {
                continue;
            }
            let mut left = O::Stats::default();
            for i in 0..n - 1 {
                left = O::add(left, self.obj.row_stats(pairs[i].1));
                let (a, b) = (pairs[i].0, pairs[i + 1].0);
                if a == b {
                    continue;
                }
                let nl = i + 1;
                if nl < min_leaf || n - nl < min_leaf {
                    continue;
                }
                let cost = self.obj.cost(left, nl) + self.obj.cost(O::sub(total, left), n - nl);
                if best.as_ref().is_none_or(|b| cost < b.cost - TIE_EPS) {
                    let mid = (a + b) / 2.0;
                    best = Some(Best {
                        cost,
                        feature: f,
                        threshold: if mid < b { mid } else { a },
                    });
                }
            }
        }
        if use_presort {
            for &r in rows {
                self.in_node[r] = false;
            }
        }
        self.pairs = pairs;
        best
    }
}

/// Row indices of each column sorted by (value, row).
pub(crate) fn presort(cols: &[Vec<f64>]) -> Vec<Vec<usize>> {
    cols.iter()
        .map(|c| {
            let mut o: Vec<usize> = (0..c.len()).collect();
            o.sort_unstable_by(|&a, &b| c[a].total_cmp(&c[b]).then(a.cmp(&b)));
            o
        })
        .collect()
}

/// Column-major copy of a row-major matrix.
pub(crate) fn to_columns(values: &[f64], n_rows: usize, n_cols: usize) -> Vec<Vec<f64>> {
    (0..n_cols)
        .map(|c| (0..n_rows).map(|r| values[r * n_cols + c]).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_data_gets_one_split_at_midpoint() {
        let cols = vec![vec![1.0, 2.0, 3.0, 4.0]];
        let labels = [false, false, true, true];
        let obj = Classification {
            labels: &labels,
            criterion: Criterion::Gini,
        };
        let params = GrowParams {
            max_depth: None,
            min_leaf: 1,
            max_features: None,
        };
        let (tree, imp) = Grower::new(&cols, &obj, &params, None).grow(vec![0, 1, 2, 3]);
        assert_eq!(
            tree.nodes[0],
            Node::Split {
                feature: 0,
                threshold: 2.5,
                left: 1,
                right: 2
            }
        );
        assert_eq!(tree.predict(&[0.0]), 0.0);
        assert_eq!(tree.predict(&[9.0]), 1.0);
        assert_eq!(imp, vec![2.0]);
    }

    #[test]
    fn presorted_orders_grow_the_same_tree() {
        let n = 200;
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|f| {
                (0..n)
                    .map(|i| ((i * (7 + f) + f * 13) % 23) as f64)
                    .collect()
            })
            .collect();
        let labels: Vec<bool> = (0..n).map(|i| (i * 5 + i / 3) % 7 < 3).collect();
        let obj = Classification {
            labels: &labels,
            criterion: Criterion::Gini,
        };
        let params = GrowParams {
            max_depth: Some(5),
            min_leaf: 2,
            max_features: None,
        };
        let plain = Grower::new(&cols, &obj, &params, None).grow((0..n).collect());
        let orders = presort(&cols);
        let fast = Grower::new(&cols, &obj, &params, None)
            .with_presorted(&orders)
            .grow((0..n).collect());
        assert_eq!(plain, fast);
    }

    #[test]
    fn pure_node_stays_leaf() {
        let cols = vec![vec![1.0, 2.0, 3.0]];
        let labels = [true; 3];
        let obj = Classification {
            labels: &labels,
            criterion: Criterion::Entropy,
        };
        let params = GrowParams {
            max_depth: None,
            min_leaf: 1,
            max_features: None,
        };
        let (tree, _) = Grower::new(&cols, &obj, &params, None).grow(vec![0, 1, 2]);
        assert_eq!(tree.nodes.len(), 1);
    }

    #[test]
    fn adjacent_floats_keep_threshold_between() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let cols = vec![vec![a, b]];
        let labels = [false, true];
        let obj = Classification {
            labels: &labels,
            criterion: Criterion::Gini,
        };
        let params = GrowParams {
            max_depth: None,
            min_leaf: 1,
            max_features: None,
        };
        let (tree, _) = Grower::new(&cols, &obj, &params, None).grow(vec![0, 1]);
        assert_eq!(tree.predict(&[a]), 0.0);
        assert_eq!(tree.predict(&[b]), 1.0);
    }
}
