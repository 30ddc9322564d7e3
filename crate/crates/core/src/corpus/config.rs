use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::schema::{self, DIGNITY_QUESTIONS};
use super::{CorpusError, LocationClass, PovertyIndicator, ProgramId, Result};

/// Inclusive calendar-date interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(CorpusError::Config(format!(
                "window end {end} precedes start {start}"
            )));
        }
        Ok(DateWindow { start, end })
    }

    /// Calendar quarter `q` (1..=4) of `year`.
    pub fn quarter(year: i32, q: u32) -> Self {
        assert!((1..=4).contains(&q), "quarter must be 1..=4");
        let start = NaiveDate::from_ymd_opt(year, 3 * q - 2, 1).expect("valid quarter start");
        let end = if q == 4 {
            NaiveDate::from_ymd_opt(year, 12, 31)
        } else {
            NaiveDate::from_ymd_opt(year, 3 * q + 1, 1).and_then(|d| d.pred_opt())
        }
        .expect("valid quarter end");
        DateWindow { start, end }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    /// Number of calendar months the window touches.
    pub fn months(&self) -> u32 {
        (month_index(self.end) - month_index(self.start) + 1) as u32
    }

    /// Whole calendar months from `date`'s month to the window's last month.
    pub fn months_until_end(&self, date: NaiveDate) -> i32 {
        month_index(self.end) - month_index(date)
    }
}

fn month_index(d: NaiveDate) -> i32 {
    d.year() * 12 + d.month0() as i32
}

impl Default for DateWindow {
    fn default() -> Self {
        DateWindow::quarter(2015, 4)
    }
}

/// Minimum (LBM) and full (LB) welfare lines, currency per household-month.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelfareLines {
    pub lbm: f64,
    pub lb: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelfareLineTable {
    pub urban: WelfareLines,
    pub rural: WelfareLines,
}

impl WelfareLineTable {
    pub fn for_class(&self, class: LocationClass) -> WelfareLines {
        match class {
            LocationClass::Urban => self.urban,
            LocationClass::Rural => self.rural,
        }
    }
}

impl Default for WelfareLineTable {
    fn default() -> Self {
        WelfareLineTable {
            urban: WelfareLines {
                lbm: 3000.0,
                lb: 6000.0,
            },
            rural: WelfareLines {
                lbm: 2200.0,
                lb: 4000.0,
            },
        }
    }
}

/// Logistic-link coefficients for one indicator:
/// `logit P(lacking) = intercept - development * development_level + program terms`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorCoefficients {
    pub intercept: f64,
    pub development: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramProfile {
    pub program_id: ProgramId,
    pub code: String,
    pub enrollment_rate: f64,
    /// Months between payments (1 = monthly).
    pub payment_interval_months: u32,
    pub base_amount: f64,
    pub n_benefits: u16,
    /// Additive logit effect of enrollment on each indicator.
    pub effects: BTreeMap<PovertyIndicator, f64>,
}

impl ProgramProfile {
    fn new(
        id: u16,
        code: &str,
        rate: f64,
        interval: u32,
        amount: f64,
        n_benefits: u16,
        effects: &[(PovertyIndicator, f64)],
    ) -> Self {
        ProgramProfile {
            program_id: ProgramId(id),
            code: code.to_string(),
            enrollment_rate: rate,
            payment_interval_months: interval,
            base_amount: amount,
            n_benefits,
            effects: effects.iter().copied().collect(),
        }
    }

    pub fn effect(&self, indicator: PovertyIndicator) -> f64 {
        self.effects.get(&indicator).copied().unwrap_or(0.0)
    }

    /// The default eight-program catalogue. Program 1 is a senior pension whose
    /// enrollees mostly lack education; program 4 is a food-support program
    /// targeted on the food dimension instead.
    pub fn default_catalogue() -> Vec<ProgramProfile> {
        use PovertyIndicator::*;
        vec![
            ProgramProfile::new(
                1,
                "senior_pension",
                0.18,
                2,
                1160.0,
                1,
                &[(Education, 2.2), (HealthServices, -0.3)],
            ),
            ProgramProfile::new(
                2,
                "conditional_cash_transfer",
                0.35,
                2,
                900.0,
                3,
                &[(Education, -0.8), (HealthServices, -0.6), (Food, 0.8)],
            ),
            ProgramProfile::new(
                3,
                "milk_distribution",
                0.20,
                1,
                140.0,
                2,
                &[(Education, -0.4), (Food, -0.7)],
            ),
            ProgramProfile::new(
                4,
                "food_support",
                0.15,
                2,
                620.0,
                1,
                &[(Education, -1.0), (Food, 2.0)],
            ),
            ProgramProfile::new(
                5,
                "literacy_services",
                0.06,
                1,
                250.0,
                1,
                &[(Education, 2.5)],
            ),
            ProgramProfile::new(
                6,
                "health_enrollment",
                0.30,
                1,
                80.0,
                2,
                &[(HealthServices, -2.2)],
            ),
            ProgramProfile::new(
                7,
                "temporary_employment",
                0.10,
                1,
                1400.0,
                1,
                &[(HealthServices, 0.6), (Food, 0.6)],
            ),
            ProgramProfile::new(8, "scholarship", 0.08, 1, 700.0, 2, &[(Education, -1.5)]),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub n_households: usize,
    pub n_regions: usize,
    pub n_localities: usize,
    pub n_blocks_per_locality: usize,
    pub locality_known_fraction: f64,
    /// Share of households with a known locality that also geocode to a block.
    pub block_known_fraction: f64,
    pub geocode_noise_deg: f64,
    pub survey_fraction: f64,
    pub verification_fraction: f64,
    pub label_missing_rate: f64,
    pub answer_missing_rate: f64,
    pub target_any_discrepancy_rate: f64,
    pub target_leq3_share: f64,
    pub social_security_lack_prevalence: f64,
    /// Probability that a discrepancy on a dignity question is an over-report.
    pub overreport_bias: BTreeMap<String, f64>,
    pub geographic_signal: f64,
    pub programmatic_signal: f64,
    pub indicators: BTreeMap<PovertyIndicator, IndicatorCoefficients>,
    pub programs: Vec<ProgramProfile>,
    pub welfare_lines: WelfareLineTable,
    pub window: DateWindow,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        use PovertyIndicator::*;
        let coef = |intercept, development| IndicatorCoefficients {
            intercept,
            development,
        };
        CorpusConfig {
            n_households: 10_000,
            n_regions: 34,
            n_localities: 340,
            n_blocks_per_locality: 12,
            locality_known_fraction: 0.41,
            block_known_fraction: 0.85,
            geocode_noise_deg: 0.001,
            survey_fraction: 0.9,
            verification_fraction: 0.06,
            label_missing_rate: 0.02,
            answer_missing_rate: 0.02,
            target_any_discrepancy_rate: 0.70,
            target_leq3_share: 0.91,
            social_security_lack_prevalence: 0.92,
            overreport_bias: [
                ("owns_stove".to_string(), 0.98),
                ("owns_air_conditioning".to_string(), 0.99),
            ]
            .into_iter()
            .collect(),
            geographic_signal: 2.0,
            programmatic_signal: 1.0,
            indicators: [
                (Education, coef(-1.2, 0.15)),
                (HealthServices, coef(-0.2, 0.1)),
                (SocialSecurity, coef(0.0, 0.0)),
                (DwellingQuality, coef(-1.0, 0.8)),
                (BasicServices, coef(-0.8, 1.0)),
                (Food, coef(-0.6, 0.2)),
            ]
            .into_iter()
            .collect(),
            programs: ProgramProfile::default_catalogue(),
            welfare_lines: WelfareLineTable::default(),
            window: DateWindow::default(),
            seed: 42,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(CorpusError::Config(m));
        let fractions = [
            ("locality_known_fraction", self.locality_known_fraction),
            ("block_known_fraction", self.block_known_fraction),
            ("survey_fraction", self.survey_fraction),
            ("verification_fraction", self.verification_fraction),
            ("label_missing_rate", self.label_missing_rate),
            ("answer_missing_rate", self.answer_missing_rate),
            (
                "target_any_discrepancy_rate",
                self.target_any_discrepancy_rate,
            ),
            ("target_leq3_share", self.target_leq3_share),
            (
                "social_security_lack_prevalence",
                self.social_security_lack_prevalence,
            ),
        ];
        for (name, v) in fractions {
            if !(0.0..=1.0).contains(&v) {
                return err(format!("{name} = {v} is outside [0, 1]"));
            }
        }
        if self.social_security_lack_prevalence <= 0.0
            || self.social_security_lack_prevalence >= 1.0
        {
            return err("social_security_lack_prevalence must be strictly inside (0, 1)".into());
        }
        for (q, bias) in &self.overreport_bias {
            if !DIGNITY_QUESTIONS.contains(&q.as_str()) {
                return err(format!(
                    "overreport_bias names `{q}`, not a dignity question"
                ));
            }
            if !(0.0..=1.0).contains(bias) {
                return err(format!("overreport_bias[{q}] = {bias} is outside [0, 1]"));
            }
        }
        if self.n_households > 0 {
            if self.n_regions == 0 || self.n_localities == 0 || self.n_blocks_per_locality == 0 {
                return err("regions, localities and blocks per locality must be positive".into());
            }
            if self.programs.is_empty() {
                return err("program catalogue is empty".into());
            }
        }
        if self.n_regions > u16::MAX as usize {
            return err("too many regions".into());
        }
        if !(self.geocode_noise_deg >= 0.0 && self.geocode_noise_deg.is_finite()) {
            return err("geocode_noise_deg must be a non-negative number".into());
        }
        for class in [LocationClass::Urban, LocationClass::Rural] {
            let l = self.welfare_lines.for_class(class);
            if !(0.0 < l.lbm && l.lbm < l.lb) {
                return err(format!(
                    "{} welfare lines need 0 < lbm < lb (got {} / {})",
                    class.name(),
                    l.lbm,
                    l.lb
                ));
            }
        }
        for ind in PovertyIndicator::ALL {
            if !self.indicators.contains_key(&ind) {
                return err(format!("missing coefficients for indicator {ind}"));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for p in &self.programs {
            if !seen.insert(p.program_id) {
                return err(format!("duplicate program id {}", p.program_id));
            }
            if !(0.0..=1.0).contains(&p.enrollment_rate) {
                return err(format!("program {} enrollment_rate outside [0, 1]", p.code));
            }
            if p.payment_interval_months == 0 || p.n_benefits == 0 || p.base_amount < 0.0 {
                return err(format!("program {} has a non-positive schedule", p.code));
            }
        }
        if self.window.end < self.window.start {
            return err("window end precedes start".into());
        }
        debug_assert!(schema::SURVEY_SCHEMA.len() == 25);
        Ok(())
    }

    /// Overreport bias for a question; non-dignity questions return `None`.
    pub fn bias_for(&self, question: &str) -> Option<f64> {
        self.overreport_bias.get(question).copied()
    }
}
