use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::PovertyIndicator;

/// A prediction target: discrepancy on home verification, or one of the six
/// deprivation indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Task {
    Underreporting,
    Indicator(PovertyIndicator),
}

impl Task {
    pub fn all() -> Vec<Task> {
        std::iter::once(Task::Underreporting)
            .chain(PovertyIndicator::ALL.into_iter().map(Task::Indicator))
            .collect()
    }

    pub fn is_imputation(self) -> bool {
        matches!(self, Task::Indicator(_))
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Underreporting => f.write_str("underreporting"),
            Task::Indicator(i) => f.write_str(i.name()),
        }
    }
}

impl FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("underreporting") {
            return Ok(Task::Underreporting);
        }
        s.parse()
            .map(Task::Indicator)
            .map_err(|_| format!("unknown task `{s}`"))
    }
}

impl TryFrom<String> for Task {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Task> for String {
    fn from(t: Task) -> String {
        t.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    Geographic,
    Socioeconomic,
    Transactional,
    Survey,
    Combined,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 5] = [
        FeatureSet::Geographic,
        FeatureSet::Socioeconomic,
        FeatureSet::Transactional,
        FeatureSet::Survey,
        FeatureSet::Combined,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::Geographic => "geographic",
            FeatureSet::Socioeconomic => "socioeconomic",
            FeatureSet::Transactional => "transactional",
            FeatureSet::Survey => "survey",
            FeatureSet::Combined => "combined",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSet {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase();
        FeatureSet::ALL
            .into_iter()
            .find(|f| f.name() == norm)
            .ok_or_else(|| format!("unknown feature set `{s}`"))
    }
}
