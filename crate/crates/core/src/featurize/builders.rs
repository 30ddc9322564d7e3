use std::collections::{BTreeMap, BTreeSet};

use super::{Column, ColumnKind, Family, FeatureMatrix, FoldRestrictedAverages};
use crate::corpus::{
    schema::SURVEY_SCHEMA, Answer, Corpus, DateWindow, HouseholdId, PovertyIndicator, ProgramId,
    QuestionKind,
};

/// Survey matrix plus the households that had no questionnaire.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyFeatures {
    pub matrix: FeatureMatrix,
    pub skipped: Vec<HouseholdId>,
}

pub fn build_survey_features(corpus: &Corpus, households: &[HouseholdId]) -> SurveyFeatures {
    let mut columns: Vec<Column> = SURVEY_SCHEMA
        .iter()
        .map(|q| {
            let kind = match q.kind {
                QuestionKind::Numeric => ColumnKind::Numeric,
                QuestionKind::Boolean => ColumnKind::Indicator,
                QuestionKind::Categorical(levels) => {
                    ColumnKind::Categorical(levels.iter().map(|l| l.to_string()).collect())
                }
            };
            Column::new(q.id, Family::Survey, kind)
        })
        .collect();
    columns.push(Column::new(
        "self_reported_income",
        Family::Survey,
        ColumnKind::Numeric,
    ));

    let (kept, skipped): (Vec<HouseholdId>, Vec<HouseholdId>) = households
        .iter()
        .partition(|&&id| corpus.survey(id).is_some());
    let mut m = FeatureMatrix::new(kept.clone(), columns);
    for (r, &id) in kept.iter().enumerate() {
        let survey = corpus.survey(id).expect("partitioned on survey presence");
        for (c, q) in SURVEY_SCHEMA.iter().enumerate() {
            let value = match (survey.answers.get(q.id), q.kind) {
                (Some(Answer::Numeric(x)), _) => Some(*x),
                (Some(Answer::Boolean(b)), _) => Some(f64::from(u8::from(*b))),
                (Some(Answer::Categorical(level)), QuestionKind::Categorical(levels)) => {
                    levels.iter().position(|l| l == level).map(|i| i as f64)
                }
                _ => None,
            };
            match value {
                Some(v) => m.set(r, c, v),
                None => m.set_missing(r, c),
            }
        }
        m.set(r, SURVEY_SCHEMA.len(), survey.self_reported_income);
    }
    SurveyFeatures { matrix: m, skipped }
}

fn program_code(corpus: &Corpus, id: ProgramId) -> String {
    corpus
        .config
        .programs
        .iter()
        .find(|p| p.program_id == id)
        .map(|p| p.code.clone())
        .unwrap_or_else(|| format!("program_{id}"))
}

const PER_PROGRAM: [(&str, bool); 5] = [
    ("enrolled", true),
    ("payments", false),
    ("amount", false),
    ("rate", false),
    ("months_since_first", false),
];

pub fn build_transactional_features(
    corpus: &Corpus,
    households: &[HouseholdId],
    window: &DateWindow,
) -> FeatureMatrix {
    let programs = corpus.program_ids();
    let mut columns = Vec::new();
    for &p in &programs {
        let code = program_code(corpus, p);
        for (suffix, indicator) in PER_PROGRAM {
            let kind = if indicator {
                ColumnKind::Indicator
            } else {
                ColumnKind::Numeric
            };
            columns.push(Column::new(
                format!("{code}_{suffix}"),
                Family::Transactional,
                kind,
            ));
        }
    }
    for name in ["total_payments", "total_amount", "n_programs"] {
        columns.push(Column::new(
            name,
            Family::Transactional,
            ColumnKind::Numeric,
        ));
    }

    let months = f64::from(window.months());
    let mut m = FeatureMatrix::new(households.to_vec(), columns);
    for (r, &id) in households.iter().enumerate() {
        let mut per: BTreeMap<ProgramId, (u32, f64, chrono::NaiveDate)> = BTreeMap::new();
        for t in corpus
            .transactions_of(id)
            .filter(|t| window.contains(t.date))
        {
            let e = per.entry(t.program_id).or_insert((0, 0.0, t.date));
            e.0 += 1;
            e.1 += t.amount;
            e.2 = e.2.min(t.date);
        }
        let (mut count, mut amount) = (0u32, 0.0);
        for (j, p) in programs.iter().enumerate() {
            let base = j * PER_PROGRAM.len();
            if let Some(&(n, total, first)) = per.get(p) {
                m.set(r, base, 1.0);
                m.set(r, base + 1, f64::from(n));
                m.set(r, base + 2, total);
                m.set(r, base + 3, f64::from(n) / months);
                m.set(r, base + 4, f64::from(window.months_until_end(first)));
                count += n;
                amount += total;
            }
        }
        let base = programs.len() * PER_PROGRAM.len();
        m.set(r, base, f64::from(count));
        m.set(r, base + 1, amount);
        m.set(r, base + 2, per.len() as f64);
    }
    m
}

pub fn average_column(indicator: PovertyIndicator) -> String {
    format!("avg_{indicator}")
}

pub fn build_spatial_features(
    corpus: &Corpus,
    households: &[HouseholdId],
    averages: &FoldRestrictedAverages,
) -> FeatureMatrix {
    let mut columns = vec![
        Column::new("manzana_latitude", Family::Spatial, ColumnKind::Numeric),
        Column::new("manzana_longitude", Family::Spatial, ColumnKind::Numeric),
    ];
    columns.extend(
        PovertyIndicator::ALL
            .iter()
            .map(|&i| Column::new(average_column(i), Family::Spatial, ColumnKind::Numeric)),
    );
    let mut m = FeatureMatrix::new(households.to_vec(), columns);
    for (r, &id) in households.iter().enumerate() {
        match corpus.household(id).and_then(|h| h.block_coords) {
            Some(c) => {
                m.set(r, 0, c.latitude);
                m.set(r, 1, c.longitude);
            }
            None => {
                m.set_missing(r, 0);
                m.set_missing(r, 1);
            }
        }
        for (j, &i) in PovertyIndicator::ALL.iter().enumerate() {
            m.set(r, 2 + j, averages.get(i).lookup(corpus, id));
        }
    }
    m
}

pub fn build_socioeconomic_features(corpus: &Corpus, households: &[HouseholdId]) -> FeatureMatrix {
    let names: BTreeSet<&String> = corpus
        .blocks
        .iter()
        .flat_map(|b| b.aggregates.keys())
        .chain(corpus.localities.iter().flat_map(|l| l.aggregates.keys()))
        .collect();
    let names: Vec<&String> = names.into_iter().collect();
    let columns = names
        .iter()
        .map(|n| {
            Column::new(
                format!("census_{n}"),
                Family::Socioeconomic,
                ColumnKind::Numeric,
            )
        })
        .collect();
    let mut m = FeatureMatrix::new(households.to_vec(), columns);
    for (r, &id) in households.iter().enumerate() {
        let h = corpus.household(id);
        let block = h.and_then(|h| h.block_id).and_then(|b| corpus.block(b));
        let locality = h
            .and_then(|h| h.locality_id)
            .and_then(|l| corpus.locality(l));
        for (c, name) in names.iter().enumerate() {
            let v = block
                .and_then(|b| b.aggregates.get(*name))
                .or_else(|| locality.and_then(|l| l.aggregates.get(*name)));
            match v {
                Some(&v) => m.set(r, c, v),
                None => m.set_missing(r, c),
            }
        }
    }
    m
}
