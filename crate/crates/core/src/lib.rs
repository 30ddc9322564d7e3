//! Synthetic social-program microdata, featurization, from-scratch learners
//! and grouped evaluation for household poverty-indicator prediction.

pub mod corpus;
pub mod eval;
pub mod featurize;
pub mod learners;
pub mod orchestrator;
pub mod pipeline;
pub mod task;
pub mod triage;
pub mod util;

pub use task::{FeatureSet, Task};
