//! The fixed questionnaire schema.
//!
//! Ten of the questions describe observable housing conditions and are the
//! ones a home-verification visit re-checks. Two of those (stove and air
//! conditioning) are "dignity" questions that respondents tend to answer
//! more favourably than reality.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuestionKind {
    Numeric,
    Boolean,
    /// Levels ordered from worst to best housing condition where that
    /// ordering is meaningful.
    Categorical(&'static [&'static str]),
}

#[derive(Debug, Clone, Copy)]
pub struct QuestionSpec {
    pub id: &'static str,
    pub kind: QuestionKind,
    pub verifiable: bool,
}

/// A single questionnaire answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Answer {
    Numeric(f64),
    Boolean(bool),
    Categorical(String),
}

impl Answer {
    pub fn render(&self) -> String {
        match self {
            Answer::Numeric(x) => x.to_string(),
            Answer::Boolean(b) => b.to_string(),
            Answer::Categorical(s) => s.clone(),
        }
    }

    pub fn parse(kind: QuestionKind, raw: &str) -> Result<Answer, String> {
        match kind {
            QuestionKind::Numeric => raw
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(Answer::Numeric)
                .ok_or_else(|| format!("expected a number, got `{raw}`")),
            QuestionKind::Boolean => match raw {
                "true" => Ok(Answer::Boolean(true)),
                "false" => Ok(Answer::Boolean(false)),
                _ => Err(format!("expected true/false, got `{raw}`")),
            },
            QuestionKind::Categorical(levels) => {
                if levels.contains(&raw) {
                    Ok(Answer::Categorical(raw.to_string()))
                } else {
                    Err(format!("level `{raw}` not in {levels:?}"))
                }
            }
        }
    }
}

const FLOOR: &[&str] = &["dirt", "cement", "tile"];
const WALL: &[&str] = &["cardboard", "adobe", "brick"];
const OCCUPATION: &[&str] = &["agriculture", "formal", "informal", "retired", "unemployed"];
const BIRTH_STATE: &[&str] = &["federal_district", "mexico_state", "other"];
const SCHOOLING: &[&str] = &["none", "primary", "secondary", "higher"];

macro_rules! q {
    ($id:literal, $kind:expr, $verifiable:literal) => {
        QuestionSpec {
            id: $id,
            kind: $kind,
            verifiable: $verifiable,
        }
    };
}

pub const SURVEY_SCHEMA: &[QuestionSpec] = &[
    q!("owns_stove", QuestionKind::Boolean, true),
    q!("owns_air_conditioning", QuestionKind::Boolean, true),
    q!("owns_refrigerator", QuestionKind::Boolean, true),
    q!("owns_washing_machine", QuestionKind::Boolean, true),
    q!("owns_television", QuestionKind::Boolean, true),
    q!("rooms_reported", QuestionKind::Numeric, true),
    q!("floor_material", QuestionKind::Categorical(FLOOR), true),
    q!("wall_material", QuestionKind::Categorical(WALL), true),
    q!("has_piped_water", QuestionKind::Boolean, true),
    q!("has_electricity", QuestionKind::Boolean, true),
    q!("respondent_age", QuestionKind::Numeric, false),
    q!("n_members_reported", QuestionKind::Numeric, false),
    q!("food_spending", QuestionKind::Numeric, false),
    q!("meals_per_day", QuestionKind::Numeric, false),
    q!("vegetable_frequency", QuestionKind::Numeric, false),
    q!("milk_frequency", QuestionKind::Numeric, false),
    q!("fruit_frequency", QuestionKind::Numeric, false),
    q!("meat_frequency", QuestionKind::Numeric, false),
    q!("occupation", QuestionKind::Categorical(OCCUPATION), false),
    q!(
        "state_of_birth",
        QuestionKind::Categorical(BIRTH_STATE),
        false
    ),
    q!(
        "schooling_head",
        QuestionKind::Categorical(SCHOOLING),
        false
    ),
    q!("has_health_insurance", QuestionKind::Boolean, false),
    q!("children_in_school", QuestionKind::Numeric, false),
    q!("has_drainage", QuestionKind::Boolean, false),
    q!("owns_vehicle", QuestionKind::Boolean, false),
];

/// Questions whose answers are flattered far more often than understated.
pub const DIGNITY_QUESTIONS: &[&str] = &["owns_stove", "owns_air_conditioning"];

pub fn question(id: &str) -> Option<&'static QuestionSpec> {
    SURVEY_SCHEMA.iter().find(|q| q.id == id)
}

pub fn verifiable_questions() -> impl Iterator<Item = &'static QuestionSpec> {
    SURVEY_SCHEMA.iter().filter(|q| q.verifiable)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn schema_ids_unique_and_sized() {
        let ids: HashSet<_> = SURVEY_SCHEMA.iter().map(|q| q.id).collect();
        assert_eq!(ids.len(), SURVEY_SCHEMA.len());
        assert_eq!(SURVEY_SCHEMA.len(), 25);
        assert_eq!(verifiable_questions().count(), 10);
        for d in DIGNITY_QUESTIONS {
            assert!(question(d).unwrap().verifiable);
        }
    }

    #[test]
    fn answer_parse_rejects_unknown_level() {
        let kind = question("floor_material").unwrap().kind;
        assert!(Answer::parse(kind, "marble").is_err());
        assert_eq!(
            Answer::parse(kind, "tile").unwrap(),
            Answer::Categorical("tile".into())
        );
    }
}
