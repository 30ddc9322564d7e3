use serde::{Deserialize, Serialize};

use super::tree::{presort, GrowParams, Grower, Regression, Tree};
use super::GbmParams;
use crate::util::{logit, sigmoid, softplus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub tree: Tree,
    /// Learning rate times any backtracking shrinkage.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boosted {
    pub prevalence: f64,
    pub init: f64,
    pub stages: Vec<Stage>,
    /// Mean training log-loss before the first stage and after each one.
    pub train_loss: Vec<f64>,
}

impl Boosted {
    pub fn raw_score(&self, row: &[f64]) -> f64 {
        self.init
            + self
                .stages
                .iter()
                .map(|s| s.scale * s.tree.predict(row))
                .sum::<f64>()
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        if self.stages.is_empty() {
            return self.prevalence;
        }
        sigmoid(self.raw_score(row)).clamp(f64::EPSILON, 1.0 - f64::EPSILON)
    }
}

/// Mean logistic loss of raw scores `f`.
pub fn log_loss(f: &[f64], y: &[bool]) -> f64 {
    let s: f64 = f
        .iter()
        .zip(y)
        .map(|(&f, &y)| softplus(f) - if y { f } else { 0.0 })
        .sum();
    s / f.len() as f64
}

const MAX_HALVINGS: usize = 40;

/// Newton boosting on logistic loss. A stage whose full step would raise the
/// training loss is halved until it does not (or dropped to zero).
pub(crate) fn fit_gbm(cols: &[Vec<f64>], y: &[bool], p: &GbmParams) -> (Boosted, Vec<f64>) {
    let n = y.len();
    let prevalence = y.iter().filter(|&&l| l).count() as f64 / n as f64;
    let init = logit(prevalence);
    let mut f = vec![init; n];
    let mut loss = log_loss(&f, y);
    let mut train_loss = vec![loss];
    let mut stages = Vec::with_capacity(p.estimators);
    let mut importance = vec![0.0; cols.len()];
    let params = GrowParams {
        max_depth: Some(p.max_depth),
        min_leaf: p.min_leaf,
        max_features: None,
    };
    let rows: Vec<usize> = (0..n).collect();
    let orders = presort(cols);
    let mut residuals = vec![0.0; n];
    let mut hessians = vec![0.0; n];
    let mut trial = vec![0.0; n];
    for _ in 0..p.estimators {
        for i in 0..n {
            let pi = sigmoid(f[i]);
            residuals[i] = f64::from(u8::from(y[i])) - pi;
            hessians[i] = pi * (1.0 - pi);
        }
        let obj = Regression {
            residuals: &residuals,
            hessians: &hessians,
        };
        let (tree, imp) = Grower::new(cols, &obj, &params, None)
            .with_presorted(&orders)
            .grow(rows.clone());
        let step: Vec<f64> = (0..n).map(|i| tree.predict_at(cols, i)).collect();
        let mut scale = p.learning_rate;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            for i in 0..n {
                trial[i] = f[i] + scale * step[i];
            }
            let l = log_loss(&trial, y);
            if l <= loss {
                loss = l;
                std::mem::swap(&mut f, &mut trial);
                accepted = true;
                break;
            }
            scale /= 2.0;
        }
        if !accepted {
            scale = 0.0;
        } else {
            for (a, b) in importance.iter_mut().zip(imp) {
                *a += b;
            }
        }
        train_loss.push(loss);
        stages.push(Stage { tree, scale });
    }
    (
        Boosted {
            prevalence,
            init,
            stages,
            train_loss,
        },
        importance,
    )
}
