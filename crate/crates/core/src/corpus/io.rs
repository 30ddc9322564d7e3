//! Flat-file persistence. Every row entity is a comma-separated file with a
//! single header line; ground truth sits in its own sidecar so observable
//! data can be shipped without it.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use csv::StringRecord;
use serde::{Deserialize, Serialize};

use super::schema::{self, Answer};
use super::*;

pub const SCHEMA_VERSION: u32 = 1;

const HOUSEHOLDS: &str = "households.csv";
const SURVEYS: &str = "surveys.csv";
const VERIFICATIONS: &str = "verifications.csv";
const TRANSACTIONS: &str = "transactions.csv";
const BLOCKS: &str = "blocks.csv";
const LOCALITIES: &str = "localities.csv";
const GROUND_TRUTH: &str = "ground_truth.csv";
const META: &str = "corpus_meta.json";

#[derive(Serialize, Deserialize)]
struct Meta {
    schema_version: u32,
    seed: u64,
    counts: BTreeMap<String, usize>,
    config: CorpusConfig,
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> CorpusError {
    let file = file_name(path);
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(source) => io_err(path, source),
            _ => unreachable!(),
        },
        csv::ErrorKind::UnequalLengths {
            pos,
            expected_len,
            len,
        } => CorpusError::Parse {
            file,
            line: pos.as_ref().map_or(0, |p| p.line()),
            field: "<record>".into(),
            message: format!("expected {expected_len} fields, found {len}"),
        },
        _ => CorpusError::Parse {
            file,
            line: e.position().map_or(0, |p| p.line()),
            field: "<record>".into(),
            message: e.to_string(),
        },
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

struct Table {
    file: String,
    headers: Vec<String>,
    rows: Vec<StringRecord>,
}

impl Table {
    fn read(dir: &Path, name: &str) -> Result<Table> {
        let path = dir.join(name);
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(&path)
            .map_err(|e| csv_err(&path, e))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| csv_err(&path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut seen = HashSet::new();
        for h in &headers {
            if !seen.insert(h) {
                return Err(CorpusError::Schema {
                    file: name.into(),
                    message: format!("column `{h}` appears more than once"),
                });
            }
        }
        let rows = reader
            .records()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| csv_err(&path, e))?;
        Ok(Table {
            file: name.to_string(),
            headers,
            rows,
        })
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CorpusError::Schema {
                file: self.file.clone(),
                message: format!("missing column `{name}`"),
            })
    }

    fn parse_err(&self, row: &StringRecord, field: &str, message: String) -> CorpusError {
        CorpusError::Parse {
            file: self.file.clone(),
            line: row.position().map_or(0, |p| p.line()),
            field: field.to_string(),
            message,
        }
    }

    fn raw<'r>(&self, row: &'r StringRecord, col: usize) -> &'r str {
        row.get(col).unwrap_or("")
    }

    fn get<T: FromStr>(&self, row: &StringRecord, col: usize) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(row, col);
        raw.parse::<T>()
            .map_err(|e| self.parse_err(row, &self.headers[col], format!("`{raw}`: {e}")))
    }

    fn opt<T: FromStr>(&self, row: &StringRecord, col: usize) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if self.raw(row, col).is_empty() {
            Ok(None)
        } else {
            self.get(row, col).map(Some)
        }
    }

    fn float(&self, row: &StringRecord, col: usize) -> Result<f64> {
        let x: f64 = self.get(row, col)?;
        if !x.is_finite() {
            return Err(self.parse_err(row, &self.headers[col], "non-finite number".into()));
        }
        Ok(x)
    }
}

fn write_rows(dir: &Path, name: &str, header: &[String], rows: Vec<Vec<String>>) -> Result<()> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(header).map_err(|e| csv_err(&path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))
}

fn opt_str<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn aggregate_names(c: &Corpus) -> Vec<String> {
    c.blocks
        .first()
        .map(|b| b.aggregates.keys().cloned().collect())
        .or_else(|| {
            c.localities
                .first()
                .map(|l| l.aggregates.keys().cloned().collect())
        })
        .unwrap_or_default()
}

pub fn save_corpus(corpus: &Corpus, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let s = |x: &str| x.to_string();

    write_rows(
        dir,
        HOUSEHOLDS,
        &[
            "household_id",
            "region_id",
            "locality_id",
            "block_id",
            "latitude",
            "longitude",
            "location_class",
            "n_members",
        ]
        .map(s),
        corpus
            .households
            .iter()
            .map(|h| {
                vec![
                    h.household_id.to_string(),
                    h.region_id.0.to_string(),
                    opt_str(h.locality_id),
                    opt_str(h.block_id),
                    opt_str(h.block_coords.map(|c| c.latitude)),
                    opt_str(h.block_coords.map(|c| c.longitude)),
                    h.location_class.name().to_string(),
                    h.n_members.to_string(),
                ]
            })
            .collect(),
    )?;

    let mut header = vec![
        s("household_id"),
        s("self_reported_income"),
        s("estimated_income"),
    ];
    header.extend(PovertyIndicator::ALL.iter().map(|i| format!("label_{i}")));
    header.extend(schema::SURVEY_SCHEMA.iter().map(|q| q.id.to_string()));
    write_rows(
        dir,
        SURVEYS,
        &header,
        corpus
            .surveys
            .iter()
            .map(|sv| {
                let mut r = vec![
                    sv.household_id.to_string(),
                    sv.self_reported_income.to_string(),
                    sv.estimated_income.to_string(),
                ];
                r.extend(
                    PovertyIndicator::ALL
                        .iter()
                        .map(|&i| sv.label(i).name().to_string()),
                );
                r.extend(
                    schema::SURVEY_SCHEMA
                        .iter()
                        .map(|q| sv.answers.get(q.id).map(Answer::render).unwrap_or_default()),
                );
                r
            })
            .collect(),
    )?;

    let mut header = vec![s("household_id"), s("surveyor_flag")];
    header.extend(schema::verifiable_questions().map(|q| q.id.to_string()));
    write_rows(
        dir,
        VERIFICATIONS,
        &header,
        corpus
            .verifications
            .iter()
            .map(|v| {
                let mut r = vec![v.household_id.to_string(), v.surveyor_flag.to_string()];
                r.extend(schema::verifiable_questions().map(|q| {
                    v.entries
                        .get(q.id)
                        .map(|o| o.name().to_string())
                        .unwrap_or_default()
                }));
                r
            })
            .collect(),
    )?;

    write_rows(
        dir,
        TRANSACTIONS,
        &["household_id", "program_id", "benefit_id", "amount", "date"].map(s),
        corpus
            .transactions
            .iter()
            .map(|t| {
                vec![
                    t.household_id.to_string(),
                    t.program_id.to_string(),
                    t.benefit_id.to_string(),
                    t.amount.to_string(),
                    t.date.format("%Y-%m-%d").to_string(),
                ]
            })
            .collect(),
    )?;

    let aggs = aggregate_names(corpus);
    let mut header = vec![
        s("block_id"),
        s("locality_id"),
        s("latitude"),
        s("longitude"),
    ];
    header.extend(aggs.iter().cloned());
    write_rows(
        dir,
        BLOCKS,
        &header,
        corpus
            .blocks
            .iter()
            .map(|b| {
                let mut r = vec![
                    b.block_id.to_string(),
                    b.locality_id.to_string(),
                    b.coords.latitude.to_string(),
                    b.coords.longitude.to_string(),
                ];
                r.extend(aggs.iter().map(|a| opt_str(b.aggregates.get(a))));
                r
            })
            .collect(),
    )?;

    let mut header = vec![
        s("locality_id"),
        s("region_id"),
        s("location_class"),
        s("latitude"),
        s("longitude"),
    ];
    header.extend(aggs.iter().cloned());
    write_rows(
        dir,
        LOCALITIES,
        &header,
        corpus
            .localities
            .iter()
            .map(|l| {
                let mut r = vec![
                    l.locality_id.to_string(),
                    l.region_id.0.to_string(),
                    l.location_class.name().to_string(),
                    l.coords.latitude.to_string(),
                    l.coords.longitude.to_string(),
                ];
                r.extend(aggs.iter().map(|a| opt_str(l.aggregates.get(a))));
                r
            })
            .collect(),
    )?;

    let mut header = vec![
        s("household_id"),
        s("development_level"),
        s("underreport_propensity"),
    ];
    header.extend(PovertyIndicator::ALL.iter().map(|i| format!("true_{i}")));
    write_rows(
        dir,
        GROUND_TRUTH,
        &header,
        corpus
            .ground_truth
            .iter()
            .map(|g| {
                let mut r = vec![
                    g.household_id.to_string(),
                    g.development_level.to_string(),
                    g.underreport_propensity.to_string(),
                ];
                r.extend(
                    PovertyIndicator::ALL
                        .iter()
                        .map(|i| opt_str(g.true_indicators.get(i).map(|&b| u8::from(b)))),
                );
                r
            })
            .collect(),
    )?;

    let meta = Meta {
        schema_version: SCHEMA_VERSION,
        seed: corpus.config.seed,
        counts: [
            ("households", corpus.households.len()),
            ("surveys", corpus.surveys.len()),
            ("verifications", corpus.verifications.len()),
            ("transactions", corpus.transactions.len()),
            ("blocks", corpus.blocks.len()),
            ("localities", corpus.localities.len()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect(),
        config: corpus.config.clone(),
    };
    let path = dir.join(META);
    let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
    fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
}

pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Corpus> {
    let dir = dir.as_ref();
    let meta_path = dir.join(META);
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| io_err(&meta_path, e))?;
    let meta: Meta = serde_json::from_str(&meta_text).map_err(|e| CorpusError::Parse {
        file: META.into(),
        line: e.line() as u64,
        field: "<json>".into(),
        message: e.to_string(),
    })?;
    if meta.schema_version != SCHEMA_VERSION {
        return Err(CorpusError::Schema {
            file: META.into(),
            message: format!(
                "schema version {} is not supported (expected {SCHEMA_VERSION})",
                meta.schema_version
            ),
        });
    }

    let t = Table::read(dir, HOUSEHOLDS)?;
    let cols = [
        "household_id",
        "region_id",
        "locality_id",
        "block_id",
        "latitude",
        "longitude",
        "location_class",
        "n_members",
    ]
    .map(|c| t.col(c));
    let [id, region, loc, block, lat, lon, class, members] = cols;
    let (id, region, loc, block, lat, lon, class, members) =
        (id?, region?, loc?, block?, lat?, lon?, class?, members?);
    let mut households = Vec::with_capacity(t.rows.len());
    for row in &t.rows {
        let latitude: Option<f64> = t.opt(row, lat)?;
        let longitude: Option<f64> = t.opt(row, lon)?;
        let block_coords = match (latitude, longitude) {
            (Some(latitude), Some(longitude)) => Some(Coords {
                latitude,
                longitude,
            }),
            (None, None) => None,
            _ => {
                return Err(t.parse_err(
                    row,
                    "latitude",
                    "latitude/longitude must both be set".into(),
                ))
            }
        };
        let n_members: u32 = t.get(row, members)?;
        if n_members == 0 {
            return Err(t.parse_err(row, "n_members", "must be positive".into()));
        }
        households.push(Household {
            household_id: t.get(row, id)?,
            region_id: RegionId(t.get(row, region)?),
            locality_id: t.opt(row, loc)?,
            block_id: t.opt(row, block)?,
            block_coords,
            location_class: t.get(row, class)?,
            n_members,
        });
    }

    let t = Table::read(dir, SURVEYS)?;
    let id = t.col("household_id")?;
    let sri = t.col("self_reported_income")?;
    let est = t.col("estimated_income")?;
    let mut label_cols = Vec::new();
    let mut question_cols = Vec::new();
    for (c, h) in t.headers.iter().enumerate() {
        if matches!(
            h.as_str(),
            "household_id" | "self_reported_income" | "estimated_income"
        ) {
            continue;
        }
        if let Some(ind) = h.strip_prefix("label_") {
            let ind: PovertyIndicator = ind.parse().map_err(|m| CorpusError::Schema {
                file: t.file.clone(),
                message: m,
            })?;
            label_cols.push((c, ind));
        } else if let Some(q) = schema::question(h) {
            question_cols.push((c, q));
        } else {
            return Err(CorpusError::Schema {
                file: t.file.clone(),
                message: format!("unknown question_id `{h}`"),
            });
        }
    }
    let mut surveys = Vec::with_capacity(t.rows.len());
    for row in &t.rows {
        let mut answers = BTreeMap::new();
        for &(c, q) in &question_cols {
            let raw = t.raw(row, c);
            if raw.is_empty() {
                continue;
            }
            let a = Answer::parse(q.kind, raw).map_err(|m| t.parse_err(row, q.id, m))?;
            answers.insert(q.id.to_string(), a);
        }
        let mut indicator_labels = BTreeMap::new();
        for &(c, ind) in &label_cols {
            let label = match t.raw(row, c) {
                "lacking" => IndicatorLabel::Lacking,
                "not_lacking" => IndicatorLabel::NotLacking,
                "missing" | "" => IndicatorLabel::Missing,
                other => {
                    return Err(t.parse_err(row, &t.headers[c], format!("unknown label `{other}`")))
                }
            };
            indicator_labels.insert(ind, label);
        }
        let self_reported_income = t.float(row, sri)?;
        let estimated_income = t.float(row, est)?;
        if self_reported_income < 0.0 || estimated_income < 0.0 {
            return Err(t.parse_err(row, "estimated_income", "incomes must be >= 0".into()));
        }
        surveys.push(CuisSurvey {
            household_id: t.get(row, id)?,
            answers,
            self_reported_income,
            estimated_income,
            indicator_labels,
        });
    }

    let t = Table::read(dir, VERIFICATIONS)?;
    let id = t.col("household_id")?;
    let flag = t.col("surveyor_flag")?;
    let mut question_cols = Vec::new();
    for (c, h) in t.headers.iter().enumerate() {
        if h == "household_id" || h == "surveyor_flag" {
            continue;
        }
        match schema::question(h) {
            Some(q) if q.verifiable => question_cols.push((c, q.id)),
            Some(_) => {
                return Err(CorpusError::Schema {
                    file: t.file.clone(),
                    message: format!("question_id `{h}` is not verifiable"),
                })
            }
            None => {
                return Err(CorpusError::Schema {
                    file: t.file.clone(),
                    message: format!("unknown question_id `{h}`"),
                })
            }
        }
    }
    let mut verifications = Vec::with_capacity(t.rows.len());
    for row in &t.rows {
        let mut entries = BTreeMap::new();
        for &(c, q) in &question_cols {
            if let Some(o) = t.opt::<VerificationOutcome>(row, c)? {
                entries.insert(q.to_string(), o);
            }
        }
        verifications.push(VerificationRecord {
            household_id: t.get(row, id)?,
            entries,
            surveyor_flag: t.get(row, flag)?,
        });
    }

    let t = Table::read(dir, TRANSACTIONS)?;
    let [id, prog, ben, amt, date] =
        ["household_id", "program_id", "benefit_id", "amount", "date"].map(|c| t.col(c));
    let (id, prog, ben, amt, date) = (id?, prog?, ben?, amt?, date?);
    let mut transactions = Vec::with_capacity(t.rows.len());
    for row in &t.rows {
        let amount = t.float(row, amt)?;
        if amount < 0.0 {
            return Err(t.parse_err(row, "amount", "must be >= 0".into()));
        }
        let raw_date = t.raw(row, date);
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d")
            .map_err(|e| t.parse_err(row, "date", format!("`{raw_date}`: {e}")))?;
        transactions.push(PubTransaction {
            household_id: t.get(row, id)?,
            program_id: t.get(row, prog)?,
            benefit_id: t.get(row, ben)?,
            amount,
            date,
        });
    }

    let t = Table::read(dir, BLOCKS)?;
    let [id, loc, lat, lon] =
        ["block_id", "locality_id", "latitude", "longitude"].map(|c| t.col(c));
    let (id, loc, lat, lon) = (id?, loc?, lat?, lon?);
    let agg_cols: Vec<usize> = (0..t.headers.len())
        .filter(|c| ![id, loc, lat, lon].contains(c))
        .collect();
    let mut blocks = Vec::with_capacity(t.rows.len());
    for row in &t.rows {
        blocks.push(CensusBlock {
            block_id: t.get(row, id)?,
            locality_id: t.get(row, loc)?,
            coords: Coords {
                latitude: t.float(row, lat)?,
                longitude: t.float(row, lon)?,
            },
            aggregates: read_aggregates(&t, row, &agg_cols)?,
        });
    }

    let t = Table::read(dir, LOCALITIES)?;
    let [id, region, class, lat, lon] = [
        "locality_id",
        "region_id",
        "location_class",
        "latitude",
        "longitude",
    ]
    .map(|c| t.col(c));
    let (id, region, class, lat, lon) = (id?, region?, class?, lat?, lon?);
    let agg_cols: Vec<usize> = (0..t.headers.len())
        .filter(|c| ![id, region, class, lat, lon].contains(c))
        .collect();
    let mut localities = Vec::with_capacity(t.rows.len());
    for row in &t.rows {
        localities.push(Locality {
            locality_id: t.get(row, id)?,
            region_id: RegionId(t.get(row, region)?),
            location_class: t.get(row, class)?,
            coords: Coords {
                latitude: t.float(row, lat)?,
                longitude: t.float(row, lon)?,
            },
            aggregates: read_aggregates(&t, row, &agg_cols)?,
        });
    }

    let ground_truth = if dir.join(GROUND_TRUTH).exists() {
        let t = Table::read(dir, GROUND_TRUTH)?;
        let id = t.col("household_id")?;
        let dev = t.col("development_level")?;
        let prop = t.col("underreport_propensity")?;
        let ind_cols: Vec<(usize, PovertyIndicator)> = PovertyIndicator::ALL
            .iter()
            .map(|&i| t.col(&format!("true_{i}")).map(|c| (c, i)))
            .collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(t.rows.len());
        for row in &t.rows {
            let mut true_indicators = BTreeMap::new();
            for &(c, ind) in &ind_cols {
                if let Some(v) = t.opt::<u8>(row, c)? {
                    true_indicators.insert(ind, v != 0);
                }
            }
            out.push(GroundTruth {
                household_id: t.get(row, id)?,
                true_indicators,
                underreport_propensity: t.float(row, prop)?,
                development_level: t.float(row, dev)?,
            });
        }
        out
    } else {
        Vec::new()
    };

    let corpus = Corpus::new(
        meta.config,
        households,
        surveys,
        verifications,
        transactions,
        localities,
        blocks,
        ground_truth,
    );
    validate_corpus(&corpus)?;
    Ok(corpus)
}

fn read_aggregates(t: &Table, row: &StringRecord, cols: &[usize]) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for &c in cols {
        if let Some(v) = t.opt::<f64>(row, c)? {
            if !(0.0..=1.0).contains(&v) {
                return Err(t.parse_err(
                    row,
                    &t.headers[c],
                    format!("aggregate {v} outside [0, 1]"),
                ));
            }
            out.insert(t.headers[c].clone(), v);
        }
    }
    Ok(out)
}

/// Referential integrity and per-record invariants.
pub fn validate_corpus(c: &Corpus) -> Result<()> {
    let fail = |m: String| Err(CorpusError::Integrity(m));
    let mut ids = HashSet::new();
    for h in &c.households {
        if !ids.insert(h.household_id) {
            return fail(format!("duplicate household {}", h.household_id));
        }
        if h.block_id.is_some() && h.locality_id.is_none() {
            return fail(format!(
                "household {} has a block but no locality",
                h.household_id
            ));
        }
        if h.block_id.is_some() != h.block_coords.is_some() {
            return fail(format!(
                "household {} block id and coordinates disagree",
                h.household_id
            ));
        }
        if let Some(l) = h.locality_id {
            if c.locality(l).is_none() {
                return fail(format!(
                    "household {} references unknown locality {l}",
                    h.household_id
                ));
            }
        }
        if let Some(b) = h.block_id {
            match c.block(b) {
                None => {
                    return fail(format!(
                        "household {} references unknown block {b}",
                        h.household_id
                    ))
                }
                Some(block) if Some(block.locality_id) != h.locality_id => {
                    return fail(format!(
                        "household {} block {b} is not in its locality",
                        h.household_id
                    ))
                }
                _ => {}
            }
        }
    }
    let known = |id: HouseholdId| ids.contains(&id);
    let mut seen = HashSet::new();
    for s in &c.surveys {
        if !known(s.household_id) {
            return fail(format!("survey for unknown household {}", s.household_id));
        }
        if !seen.insert(s.household_id) {
            return fail(format!("two surveys for household {}", s.household_id));
        }
    }
    seen.clear();
    for v in &c.verifications {
        if !known(v.household_id) {
            return fail(format!(
                "verification for unknown household {}",
                v.household_id
            ));
        }
        if !seen.insert(v.household_id) {
            return fail(format!(
                "two verifications for household {}",
                v.household_id
            ));
        }
        for q in v.entries.keys() {
            if !schema::question(q).is_some_and(|s| s.verifiable) {
                return fail(format!("verification question `{q}` is not verifiable"));
            }
        }
    }
    for t in &c.transactions {
        if !known(t.household_id) {
            return fail(format!(
                "transaction for unknown household {}",
                t.household_id
            ));
        }
    }
    for g in &c.ground_truth {
        if !known(g.household_id) {
            return fail(format!(
                "ground truth for unknown household {}",
                g.household_id
            ));
        }
    }
    for b in &c.blocks {
        if c.locality(b.locality_id).is_none() {
            return fail(format!(
                "block {} references unknown locality {}",
                b.block_id, b.locality_id
            ));
        }
        if b.aggregates.values().any(|v| !(0.0..=1.0).contains(v)) {
            return fail(format!(
                "block {} has an aggregate outside [0, 1]",
                b.block_id
            ));
        }
    }
    for l in &c.localities {
        if l.aggregates.values().any(|v| !(0.0..=1.0).contains(v)) {
            return fail(format!(
                "locality {} has an aggregate outside [0, 1]",
                l.locality_id
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::generate_corpus;

    fn corpus() -> Corpus {
        generate_corpus(&CorpusConfig {
            n_households: 600,
            n_regions: 2,
            n_localities: 10,
            n_blocks_per_locality: 4,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn round_trip_is_identity() {
        let c = corpus();
        let dir = tempfile::tempdir().unwrap();
        save_corpus(&c, dir.path()).unwrap();
        let back = load_corpus(dir.path()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn truncated_transactions_reports_line() {
        let c = corpus();
        let dir = tempfile::tempdir().unwrap();
        save_corpus(&c, dir.path()).unwrap();
        let path = dir.path().join(TRANSACTIONS);
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let last = lines.len();
        let cut = &lines[last - 1][..lines[last - 1].rfind(',').unwrap()];
        let mut truncated = lines[..last - 1].join("\n");
        truncated.push('\n');
        truncated.push_str(cut);
        fs::write(&path, truncated).unwrap();
        match load_corpus(dir.path()) {
            Err(CorpusError::Parse { file, line, .. }) => {
                assert_eq!(file, TRANSACTIONS);
                assert_eq!(line, last as u64);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_field_names_file_line_and_field() {
        let c = corpus();
        let dir = tempfile::tempdir().unwrap();
        save_corpus(&c, dir.path()).unwrap();
        let path = dir.path().join(HOUSEHOLDS);
        let text = fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        lines[3] =
            lines[3]
                .replacen(",urban,", ",suburban,", 1)
                .replacen(",rural,", ",suburban,", 1);
        fs::write(&path, lines.join("\n") + "\n").unwrap();
        let err = load_corpus(dir.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("households.csv:4"), "{msg}");
        assert!(msg.contains("location_class"), "{msg}");
    }

    #[test]
    fn unknown_question_is_schema_error() {
        let c = corpus();
        let dir = tempfile::tempdir().unwrap();
        save_corpus(&c, dir.path()).unwrap();
        let path = dir.path().join(SURVEYS);
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, text.replacen("owns_vehicle", "owns_yacht", 1)).unwrap();
        assert!(matches!(
            load_corpus(dir.path()),
            Err(CorpusError::Schema { .. })
        ));
    }

    #[test]
    fn aggregate_out_of_range_rejected_at_load() {
        let c = corpus();
        let dir = tempfile::tempdir().unwrap();
        save_corpus(&c, dir.path()).unwrap();
        let path = dir.path().join(BLOCKS);
        let text = fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let mut fields: Vec<String> = lines[1].split(',').map(str::to_string).collect();
        *fields.last_mut().unwrap() = "1.5".into();
        lines[1] = fields.join(",");
        fs::write(&path, lines.join("\n") + "\n").unwrap();
        let err = load_corpus(dir.path()).unwrap_err();
        assert!(err.to_string().contains("outside [0, 1]"), "{err}");
    }

    #[test]
    fn dangling_transaction_fails_integrity() {
        let mut c = corpus();
        c.transactions[0].household_id = HouseholdId(9_999_999);
        c.invalidate_index();
        assert!(matches!(
            validate_corpus(&c),
            Err(CorpusError::Integrity(_))
        ));
    }
}
