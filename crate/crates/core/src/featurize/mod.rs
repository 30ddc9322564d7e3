//! Household-level feature families and the matrices built from them.
//!
//! Builders return raw matrices that may carry missing cells and
//! categorical columns; [`Preprocessor`] turns them into the dense numeric
//! form the learners expect.

mod averages;
mod builders;
mod preprocess;

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::HouseholdId;
use crate::task::{FeatureSet, Task};
use crate::util::sha256_hex;

pub use averages::{compute_fold_averages, FoldRestrictedAverages, IndicatorAverages};
pub use builders::{
    build_socioeconomic_features, build_spatial_features, build_survey_features,
    build_transactional_features, SurveyFeatures,
};
pub use preprocess::{preprocess, ColumnStat, Preprocessor};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FeatureError {
    #[error("row mismatch: {0}")]
    Alignment(String),
    #[error("no training rows for {0}")]
    EmptyTraining(String),
    #[error("feature set `{set}` is not available for task `{task}`")]
    NotAllowed { set: FeatureSet, task: Task },
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Survey,
    Transactional,
    Spatial,
    Socioeconomic,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Survey => "survey",
            Family::Transactional => "transactional",
            Family::Spatial => "spatial",
            Family::Socioeconomic => "socioeconomic",
        }
    }

    /// Families a selector pulls in for `task`. Survey answers are only
    /// available where a questionnaire exists, so imputation never sees them.
    pub fn selected(set: FeatureSet, task: Task) -> Result<Vec<Family>, FeatureError> {
        let imputation = task.is_imputation();
        Ok(match set {
            FeatureSet::Geographic => vec![Family::Spatial],
            FeatureSet::Socioeconomic => vec![Family::Socioeconomic],
            FeatureSet::Transactional => vec![Family::Transactional],
            FeatureSet::Survey if imputation => return Err(FeatureError::NotAllowed { set, task }),
            FeatureSet::Survey => vec![Family::Survey],
            FeatureSet::Combined if imputation => {
                vec![
                    Family::Transactional,
                    Family::Spatial,
                    Family::Socioeconomic,
                ]
            }
            FeatureSet::Combined => vec![
                Family::Survey,
                Family::Transactional,
                Family::Spatial,
                Family::Socioeconomic,
            ],
        })
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    /// 0/1 valued.
    Indicator,
    /// Cell values index into `levels`; expanded to indicators by
    /// preprocessing.
    Categorical(Vec<String>),
}

impl ColumnKind {
    pub fn name(&self) -> &'static str {
        match self {
            ColumnKind::Numeric => "numeric",
            ColumnKind::Indicator => "indicator",
            ColumnKind::Categorical(_) => "categorical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub family: Family,
    pub kind: ColumnKind,
}

impl Column {
    pub fn new(name: impl Into<String>, family: Family, kind: ColumnKind) -> Self {
        Column {
            name: name.into(),
            family,
            kind,
        }
    }
}

/// Dense row-major matrix over households.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub row_ids: Vec<HouseholdId>,
    pub columns: Vec<Column>,
    values: Vec<f64>,
    /// Same shape as `values`, or empty when nothing is missing.
    missing: Vec<bool>,
}

impl FeatureMatrix {
    pub fn new(row_ids: Vec<HouseholdId>, columns: Vec<Column>) -> Self {
        let n = row_ids.len() * columns.len();
        FeatureMatrix {
            row_ids,
            columns,
            values: vec![0.0; n],
            missing: Vec::new(),
        }
    }

    pub fn from_rows(
        row_ids: Vec<HouseholdId>,
        columns: Vec<Column>,
        values: Vec<f64>,
    ) -> Result<Self, FeatureError> {
        if values.len() != row_ids.len() * columns.len() {
            return Err(FeatureError::Alignment(format!(
                "{} values for {} rows x {} columns",
                values.len(),
                row_ids.len(),
                columns.len()
            )));
        }
        Ok(FeatureMatrix {
            row_ids,
            columns,
            values,
            missing: Vec::new(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols() + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let p = row * self.n_cols() + col;
        self.values[p] = value;
        if !self.missing.is_empty() {
            self.missing[p] = false;
        }
    }

    pub fn set_missing(&mut self, row: usize, col: usize) {
        if self.missing.is_empty() {
            self.missing = vec![false; self.values.len()];
        }
        let p = row * self.n_cols() + col;
        self.missing[p] = true;
        self.values[p] = 0.0;
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        !self.missing.is_empty() && self.missing[row * self.n_cols() + col]
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.n_cols();
        &self.values[row * c..(row + 1) * c]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Column `col` as an owned vector; missing cells are `None`.
    pub fn column(&self, col: usize) -> Vec<Option<f64>> {
        (0..self.n_rows())
            .map(|r| (!self.is_missing(r, col)).then(|| self.get(r, col)))
            .collect()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    /// Hash of the ordered column names and kinds. Models trained on one
    /// matrix refuse matrices with a different fingerprint.
    pub fn fingerprint(&self) -> String {
        schema_fingerprint(&self.columns)
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let c = self.n_cols();
        let mut values = Vec::with_capacity(rows.len() * c);
        let mut missing = Vec::new();
        let track = !self.missing.is_empty();
        for &r in rows {
            values.extend_from_slice(self.row(r));
            if track {
                missing.extend_from_slice(&self.missing[r * c..(r + 1) * c]);
            }
        }
        FeatureMatrix {
            row_ids: rows.iter().map(|&r| self.row_ids[r]).collect(),
            columns: self.columns.clone(),
            values,
            missing,
        }
    }

    /// Only the columns tagged with one of `families`, in family order.
    pub fn select_families(&self, families: &[Family]) -> FeatureMatrix {
        let mut order: Vec<usize> = (0..self.n_cols())
            .filter(|&c| families.contains(&self.columns[c].family))
            .collect();
        order.sort_by_key(|&c| self.columns[c].family);
        self.select_columns(&order)
    }

    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        let mut out = FeatureMatrix::new(
            self.row_ids.clone(),
            cols.iter().map(|&c| self.columns[c].clone()).collect(),
        );
        for r in 0..self.n_rows() {
            for (j, &c) in cols.iter().enumerate() {
                if self.is_missing(r, c) {
                    out.set_missing(r, j);
                } else {
                    out.set(r, j, self.get(r, c));
                }
            }
        }
        out
    }

    /// Header `name:family:kind`, then one comma-separated line per row.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = self
            .columns
            .iter()
            .map(|c| format!("{}:{}:{}", c.name, c.family, c.kind.name()))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for r in 0..self.n_rows() {
            let cells: Vec<String> = (0..self.n_cols())
                .map(|c| {
                    if self.is_missing(r, c) {
                        "NA".to_string()
                    } else {
                        self.get(r, c).to_string()
                    }
                })
                .collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

pub fn schema_fingerprint(columns: &[Column]) -> String {
    let text: Vec<String> = columns
        .iter()
        .map(|c| format!("{}:{}:{}", c.name, c.family, c.kind.name()))
        .collect();
    sha256_hex(text.join("\n").as_bytes())
}

/// Column-wise concatenation of the families `set` selects for `task`.
pub fn assemble(
    matrices: &[&FeatureMatrix],
    set: FeatureSet,
    task: Task,
) -> Result<FeatureMatrix, FeatureError> {
    let families = Family::selected(set, task)?;
    let Some(first) = matrices.first() else {
        return Ok(FeatureMatrix::new(Vec::new(), Vec::new()));
    };
    for m in matrices {
        if m.row_ids != first.row_ids {
            return Err(FeatureError::Alignment(
                "matrices do not share row ids and order".into(),
            ));
        }
    }
    let mut parts: Vec<(&FeatureMatrix, usize)> = Vec::new();
    for fam in &families {
        for m in matrices {
            for c in 0..m.n_cols() {
                if m.columns[c].family == *fam {
                    parts.push((m, c));
                }
            }
        }
    }
    let mut seen = std::collections::HashSet::new();
    for (m, c) in &parts {
        if !seen.insert(&m.columns[*c].name) {
            return Err(FeatureError::DuplicateColumn(m.columns[*c].name.clone()));
        }
    }
    let mut out = FeatureMatrix::new(
        first.row_ids.clone(),
        parts.iter().map(|(m, c)| m.columns[*c].clone()).collect(),
    );
    for r in 0..out.n_rows() {
        for (j, (m, c)) in parts.iter().enumerate() {
            if m.is_missing(r, *c) {
                out.set_missing(r, j);
            } else {
                out.set(r, j, m.get(r, *c));
            }
        }
    }
    Ok(out)
}
