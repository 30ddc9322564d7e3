//! Grouped folds, precision/recall curves on a threshold grid, and
//! cross-validated evaluation of (region, task, model, feature set) cells.

mod analytics;
mod cv;
mod folds;
mod grid;
mod pr;

use crate::corpus::HouseholdId;
use crate::pipeline::PipelineError;

pub use analytics::{
    benefit_share_histogram, discrepancy_direction_report, program_indicator_table, share_bin,
    DirectionRow, ProgramRow, ProgramTable, ShareHistogram,
};
pub use cv::{run_cv, ArchiveRow, CvResult, FoldResult, FoldStatus};
pub use folds::{make_grouped_folds, FoldAssignment};
pub use grid::{cv_rows_csv, EvalGrid, GridEntry, GridKey, GRID_HEADER};
pub use pr::{
    baseline_references, grid_steps, pr_curve, BaselineReference, PrCurve, PrPoint,
    DEFAULT_GRID_STEP,
};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("need 2 <= k <= households, got k = {k} for {households} households")]
    FoldCount { k: usize, households: usize },
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("no scores")]
    Empty,
    #[error("no positive labels; the curve is undefined")]
    NoPositives,
    #[error("grid step {0} is not in (0, 1]")]
    GridStep(f64),
    #[error("prevalence {0} is not in (0, 1]")]
    Prevalence(f64),
    #[error("household {0} has no fold")]
    Unassigned(HouseholdId),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

impl PartialEq for EvalError {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}
