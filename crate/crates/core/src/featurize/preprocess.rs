use serde::{Deserialize, Serialize};

use super::{Column, ColumnKind, FeatureError, FeatureMatrix};
use crate::util::median;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnStat {
    Numeric {
        fill: f64,
    },
    Indicator {
        fill: f64,
    },
    /// `kept` are indices into the input levels that occur in training rows,
    /// ordered by level name; `fill` is the modal one.
    Categorical {
        kept: Vec<usize>,
        fill: Option<usize>,
    },
}

/// Imputation and dummy-encoding statistics fit on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    input: Vec<Column>,
    pub stats: Vec<ColumnStat>,
    output: Vec<Column>,
    /// Columns with no observed training value; numeric ones are filled
    /// with 0, categorical ones produce no indicators.
    pub all_missing: Vec<String>,
}

impl Preprocessor {
    /// Fit on `training_rows` (all rows when `None`).
    pub fn fit(m: &FeatureMatrix, training_rows: Option<&[usize]>) -> Preprocessor {
        let all: Vec<usize>;
        let rows = match training_rows {
            Some(r) => r,
            None => {
                all = (0..m.n_rows()).collect();
                &all
            }
        };
        let mut stats = Vec::with_capacity(m.n_cols());
        let mut output = Vec::new();
        let mut all_missing = Vec::new();
        for (c, col) in m.columns.iter().enumerate() {
            let observed = rows
                .iter()
                .filter(|&&r| !m.is_missing(r, c))
                .map(|&r| m.get(r, c));
            match &col.kind {
                ColumnKind::Numeric => {
                    let mut v: Vec<f64> = observed.collect();
                    let fill = median(&mut v).unwrap_or_else(|| {
                        all_missing.push(col.name.clone());
                        0.0
                    });
                    stats.push(ColumnStat::Numeric { fill });
                    output.push(col.clone());
                }
                ColumnKind::Indicator => {
                    let (mut zeros, mut ones) = (0usize, 0usize);
                    for v in observed {
                        if v != 0.0 {
                            ones += 1;
                        } else {
                            zeros += 1;
                        }
                    }
                    if zeros + ones == 0 {
                        all_missing.push(col.name.clone());
                    }
                    let fill = if ones > zeros { 1.0 } else { 0.0 };
                    stats.push(ColumnStat::Indicator { fill });
                    output.push(col.clone());
                }
                ColumnKind::Categorical(levels) => {
                    let mut counts = vec![0usize; levels.len()];
                    for v in observed {
                        if let Some(n) = counts.get_mut(v as usize) {
                            *n += 1;
                        }
                    }
                    let mut kept: Vec<usize> =
                        (0..levels.len()).filter(|&i| counts[i] > 0).collect();
                    kept.sort_by(|&a, &b| levels[a].cmp(&levels[b]));
                    // `kept` is in name order, so the first maximum is the
                    // lexicographically smallest modal level.
                    let fill =
                        kept.iter()
                            .copied()
                            .fold(None, |best: Option<usize>, i| match best {
                                Some(b) if counts[b] >= counts[i] => Some(b),
                                _ => Some(i),
                            });
                    if fill.is_none() {
                        all_missing.push(col.name.clone());
                    }
                    for &i in &kept {
                        output.push(Column::new(
                            format!("{}_{}", col.name, levels[i]),
                            col.family,
                            ColumnKind::Indicator,
                        ));
                    }
                    stats.push(ColumnStat::Categorical { kept, fill });
                }
            }
        }
        Preprocessor {
            input: m.columns.clone(),
            stats,
            output,
            all_missing,
        }
    }

    pub fn output_columns(&self) -> &[Column] {
        &self.output
    }

    pub fn apply(&self, m: &FeatureMatrix) -> Result<FeatureMatrix, FeatureError> {
        if m.columns != self.input {
            let first = m
                .columns
                .iter()
                .zip(&self.input)
                .find(|(a, b)| a != b)
                .map(|(a, _)| a.name.clone())
                .unwrap_or_else(|| format!("{} columns vs {}", m.n_cols(), self.input.len()));
            return Err(FeatureError::Alignment(format!(
                "preprocessor was fit on a different schema (first difference: {first})"
            )));
        }
        let width = self.output.len();
        let mut values = Vec::with_capacity(m.n_rows() * width);
        for r in 0..m.n_rows() {
            for (c, stat) in self.stats.iter().enumerate() {
                let cell = (!m.is_missing(r, c)).then(|| m.get(r, c));
                match stat {
                    ColumnStat::Numeric { fill } | ColumnStat::Indicator { fill } => {
                        values.push(cell.unwrap_or(*fill))
                    }
                    ColumnStat::Categorical { kept, fill } => {
                        let level = cell
                            .map(|v| v as usize)
                            .filter(|l| kept.contains(l))
                            .or(*fill);
                        values.extend(kept.iter().map(|&k| f64::from(u8::from(Some(k) == level))));
                    }
                }
            }
        }
        FeatureMatrix::from_rows(m.row_ids.clone(), self.output.clone(), values)
    }
}

/// Fit on every row and apply.
pub fn preprocess(m: &FeatureMatrix) -> FeatureMatrix {
    Preprocessor::fit(m, None)
        .apply(m)
        .expect("a preprocessor accepts the matrix it was fit on")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::HouseholdId;
    use crate::featurize::Family;

    fn one_col(kind: ColumnKind, cells: &[Option<f64>]) -> FeatureMatrix {
        let mut m = FeatureMatrix::new(
            (0..cells.len() as u32).map(HouseholdId).collect(),
            vec![Column::new("x", Family::Survey, kind)],
        );
        for (r, v) in cells.iter().enumerate() {
            match v {
                Some(v) => m.set(r, 0, *v),
                None => m.set_missing(r, 0),
            }
        }
        m
    }

    fn cat(levels: &[&str]) -> ColumnKind {
        ColumnKind::Categorical(levels.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn numeric_median_fill() {
        let p = preprocess(&one_col(ColumnKind::Numeric, &[Some(1.0), None, Some(3.0)]));
        assert_eq!(p.values(), &[1.0, 2.0, 3.0]);
        assert!(!p.has_missing());
    }

    #[test]
    fn categorical_mode_and_dummies() {
        let m = one_col(cat(&["a", "b"]), &[Some(0.0), Some(0.0), Some(1.0), None]);
        let p = preprocess(&m);
        assert_eq!(p.column_names(), vec!["x_a", "x_b"]);
        let xa: Vec<f64> = (0..4).map(|r| p.get(r, 0)).collect();
        let xb: Vec<f64> = (0..4).map(|r| p.get(r, 1)).collect();
        assert_eq!(xa, vec![1.0, 1.0, 0.0, 1.0]);
        assert_eq!(xb, vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn modal_tie_takes_smallest_level() {
        // Level order in the schema is reversed from name order.
        let m = one_col(
            cat(&["b", "a"]),
            &[Some(0.0), Some(0.0), Some(1.0), Some(1.0), None],
        );
        let p = preprocess(&m);
        assert_eq!(p.column_names(), vec!["x_a", "x_b"]);
        assert_eq!(p.row(4), &[1.0, 0.0]);
    }

    #[test]
    fn all_missing_column_is_zero_and_reported() {
        let m = one_col(ColumnKind::Numeric, &[None, None]);
        let pre = Preprocessor::fit(&m, None);
        assert_eq!(pre.all_missing, vec!["x".to_string()]);
        assert_eq!(pre.apply(&m).unwrap().values(), &[0.0, 0.0]);
    }

    #[test]
    fn fit_uses_training_rows_only() {
        let m = one_col(
            ColumnKind::Numeric,
            &[Some(1.0), Some(3.0), Some(100.0), None],
        );
        let pre = Preprocessor::fit(&m, Some(&[0, 1, 3]));
        assert_eq!(pre.stats[0], ColumnStat::Numeric { fill: 2.0 });
    }

    #[test]
    fn unseen_level_is_imputed_with_mode() {
        let m = one_col(
            cat(&["a", "b", "c"]),
            &[Some(0.0), Some(1.0), Some(1.0), Some(2.0)],
        );
        let pre = Preprocessor::fit(&m, Some(&[0, 1, 2]));
        let p = pre.apply(&m).unwrap();
        assert_eq!(p.column_names(), vec!["x_a", "x_b"]);
        assert_eq!(p.row(3), &[0.0, 1.0]);
    }

    #[test]
    fn idempotent() {
        let m = one_col(cat(&["a", "b"]), &[Some(1.0), None, Some(0.0)]);
        let once = preprocess(&m);
        assert_eq!(preprocess(&once), once);
    }
}
