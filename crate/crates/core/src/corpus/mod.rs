//! Household microdata: beneficiary registry, socioeconomic questionnaires,
//! home-verification results, payment ledger and census blocks.
//!
//! A [`Corpus`] is either produced by [`generate_corpus`] (synthetic, with a
//! hidden [`GroundTruth`] sidecar) or read back from disk with [`load_corpus`].
//! Once built it is treated as immutable; lookups go through the lazily built
//! [`CorpusIndex`].

mod config;
mod filter;
mod generate;
mod io;
pub mod schema;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use config::{
    CorpusConfig, DateWindow, IndicatorCoefficients, ProgramProfile, WelfareLineTable, WelfareLines,
};
pub use filter::{apply_locality_filter, drop_missing_labels};
pub use generate::{generate_corpus, indicator_logit};
pub use io::{load_corpus, save_corpus, validate_corpus, SCHEMA_VERSION};
pub use schema::{Answer, QuestionKind, QuestionSpec, SURVEY_SCHEMA};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("invalid corpus configuration: {0}")]
    Config(String),
    #[error("{file}:{line}: field `{field}`: {message}")]
    Parse {
        file: String,
        line: u64,
        field: String,
        message: String,
    },
    #[error("{file}: schema error: {message}")]
    Schema { file: String, message: String },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident, $inner:ty) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub $inner);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }

        impl FromStr for $name {
            type Err = std::num::ParseIntError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                s.trim().parse().map($name)
            }
        }
    };
}

id_newtype!(HouseholdId, u32);
id_newtype!(LocalityId, u32);
id_newtype!(BlockId, u32);
id_newtype!(ProgramId, u16);
id_newtype!(BenefitId, u16);

/// One of the modeling regions (states, with the capital split further).
/// Written as a bare integer in files; `R7` is accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegionId(pub u16);

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}", self.0)
    }
}

impl FromStr for RegionId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let digits = t.strip_prefix(['R', 'r']).unwrap_or(t);
        digits
            .parse()
            .map(RegionId)
            .map_err(|_| format!("invalid region id `{s}` (expected e.g. R3 or 3)"))
    }
}

/// The six basic-needs deprivation indicators, in their stable column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PovertyIndicator {
    Education,
    HealthServices,
    SocialSecurity,
    DwellingQuality,
    BasicServices,
    Food,
}

impl PovertyIndicator {
    pub const ALL: [PovertyIndicator; 6] = [
        PovertyIndicator::Education,
        PovertyIndicator::HealthServices,
        PovertyIndicator::SocialSecurity,
        PovertyIndicator::DwellingQuality,
        PovertyIndicator::BasicServices,
        PovertyIndicator::Food,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PovertyIndicator::Education => "education",
            PovertyIndicator::HealthServices => "health_services",
            PovertyIndicator::SocialSecurity => "social_security",
            PovertyIndicator::DwellingQuality => "dwelling_quality",
            PovertyIndicator::BasicServices => "basic_services",
            PovertyIndicator::Food => "food",
        }
    }

    pub fn ordinal(self) -> usize {
        self as usize
    }
}

impl fmt::Display for PovertyIndicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PovertyIndicator {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        PovertyIndicator::ALL
            .into_iter()
            .find(|i| i.name() == norm)
            .ok_or_else(|| format!("unknown poverty indicator `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationClass {
    Urban,
    Rural,
}

impl LocationClass {
    pub fn name(self) -> &'static str {
        match self {
            LocationClass::Urban => "urban",
            LocationClass::Rural => "rural",
        }
    }
}

impl FromStr for LocationClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "urban" => Ok(LocationClass::Urban),
            "rural" => Ok(LocationClass::Rural),
            other => Err(format!("unknown location class `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coords {
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Household {
    pub household_id: HouseholdId,
    pub region_id: RegionId,
    pub locality_id: Option<LocalityId>,
    pub block_id: Option<BlockId>,
    pub block_coords: Option<Coords>,
    pub location_class: LocationClass,
    pub n_members: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorLabel {
    Lacking,
    NotLacking,
    Missing,
}

impl IndicatorLabel {
    pub fn as_bool(self) -> Option<bool> {
        match self {
            IndicatorLabel::Lacking => Some(true),
            IndicatorLabel::NotLacking => Some(false),
            IndicatorLabel::Missing => None,
        }
    }

    pub fn from_bool(lacking: bool) -> Self {
        if lacking {
            IndicatorLabel::Lacking
        } else {
            IndicatorLabel::NotLacking
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            IndicatorLabel::Lacking => "lacking",
            IndicatorLabel::NotLacking => "not_lacking",
            IndicatorLabel::Missing => "missing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuisSurvey {
    pub household_id: HouseholdId,
    /// Answers keyed by question id; absent keys are unanswered questions.
    pub answers: BTreeMap<String, Answer>,
    pub self_reported_income: f64,
    pub estimated_income: f64,
    pub indicator_labels: BTreeMap<PovertyIndicator, IndicatorLabel>,
}

impl CuisSurvey {
    pub fn label(&self, indicator: PovertyIndicator) -> IndicatorLabel {
        self.indicator_labels
            .get(&indicator)
            .copied()
            .unwrap_or(IndicatorLabel::Missing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerificationOutcome {
    Match,
    UnderReported,
    OverReported,
}

impl VerificationOutcome {
    pub fn name(self) -> &'static str {
        match self {
            VerificationOutcome::Match => "match",
            VerificationOutcome::UnderReported => "under_reported",
            VerificationOutcome::OverReported => "over_reported",
        }
    }
}

impl FromStr for VerificationOutcome {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "match" => Ok(VerificationOutcome::Match),
            "under_reported" => Ok(VerificationOutcome::UnderReported),
            "over_reported" => Ok(VerificationOutcome::OverReported),
            other => Err(format!("unknown verification outcome `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub household_id: HouseholdId,
    pub entries: BTreeMap<String, VerificationOutcome>,
    pub surveyor_flag: bool,
}

impl VerificationRecord {
    pub fn n_discrepancies(&self) -> usize {
        self.entries
            .values()
            .filter(|o| **o != VerificationOutcome::Match)
            .count()
    }

    pub fn any_discrepancy(&self) -> bool {
        self.n_discrepancies() > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PubTransaction {
    pub household_id: HouseholdId,
    pub program_id: ProgramId,
    pub benefit_id: BenefitId,
    pub amount: f64,
    pub date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Locality {
    pub locality_id: LocalityId,
    pub region_id: RegionId,
    pub location_class: LocationClass,
    pub coords: Coords,
    pub aggregates: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusBlock {
    pub block_id: BlockId,
    pub locality_id: LocalityId,
    pub coords: Coords,
    pub aggregates: BTreeMap<String, f64>,
}

/// Hidden synthetic truth; never fed to learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub household_id: HouseholdId,
    pub true_indicators: BTreeMap<PovertyIndicator, bool>,
    pub underreport_propensity: f64,
    pub development_level: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub config: CorpusConfig,
    pub households: Vec<Household>,
    pub surveys: Vec<CuisSurvey>,
    pub verifications: Vec<VerificationRecord>,
    pub transactions: Vec<PubTransaction>,
    pub localities: Vec<Locality>,
    pub blocks: Vec<CensusBlock>,
    pub ground_truth: Vec<GroundTruth>,
    index: OnceLock<CorpusIndex>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.households == other.households
            && self.surveys == other.surveys
            && self.verifications == other.verifications
            && self.transactions == other.transactions
            && self.localities == other.localities
            && self.blocks == other.blocks
            && self.ground_truth == other.ground_truth
    }
}

/// Position lookups into a [`Corpus`].
#[derive(Debug, Clone, Default)]
pub struct CorpusIndex {
    pub household: HashMap<HouseholdId, usize>,
    pub survey: HashMap<HouseholdId, usize>,
    pub verification: HashMap<HouseholdId, usize>,
    pub ground_truth: HashMap<HouseholdId, usize>,
    pub transactions: HashMap<HouseholdId, Vec<usize>>,
    pub block: HashMap<BlockId, usize>,
    pub locality: HashMap<LocalityId, usize>,
    pub region_households: BTreeMap<RegionId, Vec<HouseholdId>>,
}

impl Corpus {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        config: CorpusConfig,
        households: Vec<Household>,
        surveys: Vec<CuisSurvey>,
        verifications: Vec<VerificationRecord>,
        transactions: Vec<PubTransaction>,
        localities: Vec<Locality>,
        blocks: Vec<CensusBlock>,
        ground_truth: Vec<GroundTruth>,
    ) -> Self {
        Corpus {
            config,
            households,
            surveys,
            verifications,
            transactions,
            localities,
            blocks,
            ground_truth,
            index: OnceLock::new(),
        }
    }

    /// Lookup tables, built on first use. Call [`Corpus::invalidate_index`]
    /// after adding or removing records.
    pub fn index(&self) -> &CorpusIndex {
        self.index.get_or_init(|| {
            let mut idx = CorpusIndex::default();
            for (i, h) in self.households.iter().enumerate() {
                idx.household.insert(h.household_id, i);
                idx.region_households
                    .entry(h.region_id)
                    .or_default()
                    .push(h.household_id);
            }
            for (i, s) in self.surveys.iter().enumerate() {
                idx.survey.insert(s.household_id, i);
            }
            for (i, v) in self.verifications.iter().enumerate() {
                idx.verification.insert(v.household_id, i);
            }
            for (i, g) in self.ground_truth.iter().enumerate() {
                idx.ground_truth.insert(g.household_id, i);
            }
            for (i, t) in self.transactions.iter().enumerate() {
                idx.transactions.entry(t.household_id).or_default().push(i);
            }
            for (i, b) in self.blocks.iter().enumerate() {
                idx.block.insert(b.block_id, i);
            }
            for (i, l) in self.localities.iter().enumerate() {
                idx.locality.insert(l.locality_id, i);
            }
            idx
        })
    }

    pub fn invalidate_index(&mut self) {
        self.index = OnceLock::new();
    }

    pub fn household(&self, id: HouseholdId) -> Option<&Household> {
        self.index()
            .household
            .get(&id)
            .map(|&i| &self.households[i])
    }

    pub fn survey(&self, id: HouseholdId) -> Option<&CuisSurvey> {
        self.index().survey.get(&id).map(|&i| &self.surveys[i])
    }

    pub fn survey_mut(&mut self, id: HouseholdId) -> Option<&mut CuisSurvey> {
        let pos = self.index().survey.get(&id).copied();
        pos.map(move |i| &mut self.surveys[i])
    }

    pub fn verification(&self, id: HouseholdId) -> Option<&VerificationRecord> {
        self.index()
            .verification
            .get(&id)
            .map(|&i| &self.verifications[i])
    }

    pub fn ground_truth_for(&self, id: HouseholdId) -> Option<&GroundTruth> {
        self.index()
            .ground_truth
            .get(&id)
            .map(|&i| &self.ground_truth[i])
    }

    pub fn transactions_of(&self, id: HouseholdId) -> impl Iterator<Item = &PubTransaction> {
        self.index()
            .transactions
            .get(&id)
            .into_iter()
            .flatten()
            .map(move |&i| &self.transactions[i])
    }

    pub fn block(&self, id: BlockId) -> Option<&CensusBlock> {
        self.index().block.get(&id).map(|&i| &self.blocks[i])
    }

    pub fn locality(&self, id: LocalityId) -> Option<&Locality> {
        self.index().locality.get(&id).map(|&i| &self.localities[i])
    }

    /// Regions that contain at least one household, ascending.
    pub fn regions(&self) -> Vec<RegionId> {
        self.index().region_households.keys().copied().collect()
    }

    pub fn households_in(&self, region: RegionId) -> &[HouseholdId] {
        self.index()
            .region_households
            .get(&region)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Program ids of the configured catalogue, ascending.
    pub fn program_ids(&self) -> Vec<ProgramId> {
        let mut ids: Vec<ProgramId> = self.config.programs.iter().map(|p| p.program_id).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn welfare_lines(&self, class: LocationClass) -> WelfareLines {
        self.config.welfare_lines.for_class(class)
    }
}
