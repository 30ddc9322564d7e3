use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{CvResult, FoldStatus, PrCurve};
use crate::corpus::RegionId;
use crate::task::{FeatureSet, Task};

/// `fold == None` is the pooled out-of-fold curve.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridKey {
    pub region: RegionId,
    pub task: Task,
    pub model: String,
    pub feature_set: FeatureSet,
    pub fold: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub curve: Option<PrCurve>,
    /// `done`, or `degenerate: <reason>`.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalGrid {
    pub entries: BTreeMap<GridKey, GridEntry>,
}

pub const GRID_HEADER: [&str; 10] = [
    "region",
    "task",
    "model",
    "feature_set",
    "fold",
    "threshold",
    "proportion_flagged",
    "precision",
    "recall",
    "status",
];

impl EvalGrid {
    pub fn insert_cv(&mut self, r: &CvResult) {
        let key = |fold| GridKey {
            region: r.region,
            task: r.task,
            model: r.model.clone(),
            feature_set: r.feature_set,
            fold,
        };
        if let Some(reason) = &r.degenerate {
            self.entries.insert(
                key(None),
                GridEntry {
                    curve: None,
                    status: format!("degenerate: {reason}"),
                },
            );
            return;
        }
        for f in &r.folds {
            let status = match &f.status {
                FoldStatus::Done => "done".to_string(),
                FoldStatus::Degenerate { reason } => format!("degenerate: {reason}"),
            };
            self.entries.insert(
                key(Some(f.fold)),
                GridEntry {
                    curve: f.curve.clone(),
                    status,
                },
            );
        }
        self.entries.insert(
            key(None),
            GridEntry {
                curve: r.pooled.clone(),
                status: "done".into(),
            },
        );
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(GRID_HEADER)?;
        for (k, e) in &self.entries {
            write_entry(&mut out, k, e)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub(crate) fn write_entry<W: Write>(
    out: &mut csv::Writer<W>,
    k: &GridKey,
    e: &GridEntry,
) -> csv::Result<()> {
    let fold = k.fold.map_or("pooled".to_string(), |f| f.to_string());
    let head = [
        k.region.0.to_string(),
        k.task.to_string(),
        k.model.clone(),
        k.feature_set.to_string(),
        fold,
    ];
    match &e.curve {
        None => {
            let mut rec: Vec<String> = head.to_vec();
            rec.extend(["NA", "NA", "NA", "NA"].map(String::from));
            rec.push(e.status.clone());
            out.write_record(&rec)?;
        }
        Some(c) => {
            for p in &c.points {
                let mut rec: Vec<String> = head.to_vec();
                rec.push(p.threshold.to_string());
                rec.push(p.proportion_flagged.to_string());
                rec.push(p.precision.map_or("NA".to_string(), |v| v.to_string()));
                rec.push(p.recall.to_string());
                rec.push(e.status.clone());
                out.write_record(&rec)?;
            }
        }
    }
    Ok(())
}

/// Curve rows for one cross-validation result, grid layout.
pub fn cv_rows_csv(r: &CvResult) -> String {
    let mut g = EvalGrid::default();
    g.insert_cv(r);
    let mut buf = Vec::new();
    g.write_csv(&mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8")
}
