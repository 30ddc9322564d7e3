use serde::{Deserialize, Serialize};

use super::LearnerError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    #[default]
    Gini,
    Entropy,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::Gini => "gini",
            Criterion::Entropy => "entropy",
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "gini" => Ok(Criterion::Gini),
            "entropy" => Ok(Criterion::Entropy),
            other => Err(format!("unknown criterion `{other}`")),
        }
    }
}

/// Impurity of a node holding `positives` out of `n` (> 0) labels.
pub fn impurity_from_counts(positives: u32, n: u32, criterion: Criterion) -> f64 {
    let p = f64::from(positives) / f64::from(n);
    let q = 1.0 - p;
    match criterion {
        Criterion::Gini => 1.0 - p * p - q * q,
        Criterion::Entropy => {
            let h = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
            h(p) + h(q)
        }
    }
}

pub fn impurity(labels: &[bool], criterion: Criterion) -> Result<f64, LearnerError> {
    if labels.is_empty() {
        return Err(LearnerError::Empty);
    }
    let pos = labels.iter().filter(|&&l| l).count() as u32;
    Ok(impurity_from_counts(pos, labels.len() as u32, criterion))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        let g = |l: &[bool]| impurity(l, Criterion::Gini).unwrap();
        let e = |l: &[bool]| impurity(l, Criterion::Entropy).unwrap();
        assert_eq!(g(&[true, true, false, false]), 0.5);
        assert_eq!(e(&[true; 4]), 0.0);
        assert_eq!(g(&[true, false, false, false]), 0.375);
        assert_eq!(e(&[true, false]), 1.0);
        assert!(impurity(&[], Criterion::Gini).is_err());
    }
}
