//! Synthetic population generator with planted signals.
//!
//! Structure of the latent model:
//!
//! * development level is nested region → locality → block and drives
//!   housing/services indicators, census aggregates and asset ownership;
//! * program enrollment is drawn independently of geography and enters the
//!   education, health and food indicators through per-program logit effects;
//! * social-security deprivation is pure noise at the configured prevalence;
//! * misreporting is driven by a per-household propensity. The share of
//!   verified households with any discrepancy, the share of discrepant
//!   records with at most three discrepancies, and the direction split of
//!   dignity-question discrepancies are all hit by quota on the verified
//!   sample; the thresholds found there are applied to everyone else.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Geometric, Normal, Poisson};

use super::schema::{self, Answer, QuestionKind, DIGNITY_QUESTIONS};
use super::*;
use crate::util::{logit, rng_stream, round_cents, sigmoid};

/// Census aggregates as (name, intercept, development slope).
const AGGREGATES: &[(&str, f64, f64)] = &[
    ("car_ownership", -0.8, 0.9),
    ("dirt_floor", -2.0, -1.0),
    ("drainage", 0.8, 1.3),
    ("electricity", 2.5, 1.2),
    ("health_coverage", 0.5, 0.3),
    ("literacy", 2.0, 0.5),
    ("overcrowding", -1.0, -0.6),
    ("piped_water", 1.2, 1.2),
];

/// Relative chance that a discrepancy lands on each verifiable question.
const DISCREPANCY_WEIGHTS: &[(&str, f64)] = &[
    ("owns_stove", 3.0),
    ("owns_air_conditioning", 2.2),
    ("owns_refrigerator", 0.9),
    ("owns_washing_machine", 0.7),
    ("owns_television", 0.5),
    ("rooms_reported", 1.0),
    ("floor_material", 0.6),
    ("wall_material", 0.5),
    ("has_piped_water", 0.4),
    ("has_electricity", 0.3),
];

/// Logit of P(lacking) under the planted model, given the household's block
/// development level and the set of programs it is enrolled in.
pub fn indicator_logit(
    config: &CorpusConfig,
    indicator: PovertyIndicator,
    development: f64,
    enrolled: &[ProgramId],
) -> f64 {
    use PovertyIndicator::*;
    if indicator == SocialSecurity {
        return logit(config.social_security_lack_prevalence);
    }
    let coef = config.indicators[&indicator];
    let geo = match indicator {
        BasicServices | DwellingQuality => config.geographic_signal,
        _ => 1.0,
    };
    let prog = match indicator {
        Education | HealthServices | Food => config.programmatic_signal,
        _ => 1.0,
    };
    let program_term: f64 = config
        .programs
        .iter()
        .filter(|p| enrolled.contains(&p.program_id))
        .map(|p| p.effect(indicator))
        .sum();
    coef.intercept - coef.development * geo * development + prog * program_term
}

struct Region {
    development: f64,
    centre: Coords,
}

struct HouseholdDraft {
    household: Household,
    true_block: usize,
    development: f64,
    enrolled: Vec<ProgramId>,
    indicators: [bool; 6],
    age: f64,
    propensity_logit: f64,
    surveyed: bool,
    verified: bool,
}

pub fn generate_corpus(config: &CorpusConfig) -> Result<Corpus> {
    config.validate()?;
    if config.n_households == 0 {
        return Ok(Corpus::new(
            config.clone(),
            vec![],
            vec![],
            vec![],
            vec![],
            vec![],
            vec![],
            vec![],
        ));
    }
    let seed = config.seed;
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    // Geography.
    let mut rng = rng_stream(seed, 1);
    let regions: Vec<Region> = (0..config.n_regions)
        .map(|_| Region {
            development: 0.5 * std_normal.sample(&mut rng),
            centre: Coords {
                latitude: rng.random_range(15.5..31.5),
                longitude: rng.random_range(-116.0..-88.0),
            },
        })
        .collect();

    let mut localities = Vec::with_capacity(config.n_localities);
    let mut locality_dev = Vec::with_capacity(config.n_localities);
    for l in 0..config.n_localities {
        let r = l % config.n_regions;
        let dev = regions[r].development + 0.6 * std_normal.sample(&mut rng);
        let rural = rng.random_bool(sigmoid(-0.3 - 1.5 * dev));
        localities.push(Locality {
            locality_id: LocalityId(l as u32 + 1),
            region_id: RegionId(r as u16 + 1),
            location_class: if rural {
                LocationClass::Rural
            } else {
                LocationClass::Urban
            },
            coords: Coords {
                latitude: regions[r].centre.latitude + rng.random_range(-0.6..0.6),
                longitude: regions[r].centre.longitude + rng.random_range(-0.6..0.6),
            },
            aggregates: BTreeMap::new(),
        });
        locality_dev.push(dev);
    }

    let nb = config.n_blocks_per_locality;
    let mut blocks = Vec::with_capacity(config.n_localities * nb);
    let mut block_dev = Vec::with_capacity(config.n_localities * nb);
    for (l, loc) in localities.iter().enumerate() {
        for b in 0..nb {
            let dev = locality_dev[l] + 0.5 * std_normal.sample(&mut rng);
            let aggregates = AGGREGATES
                .iter()
                .map(|&(name, a, s)| {
                    let v = sigmoid(a + s * dev + 0.3 * std_normal.sample(&mut rng));
                    (name.to_string(), v)
                })
                .collect();
            blocks.push(CensusBlock {
                block_id: BlockId((l * nb + b) as u32 + 1),
                locality_id: loc.locality_id,
                coords: Coords {
                    latitude: loc.coords.latitude + rng.random_range(-0.03..0.03),
                    longitude: loc.coords.longitude + rng.random_range(-0.03..0.03),
                },
                aggregates,
            });
            block_dev.push(dev);
        }
    }
    for (l, loc) in localities.iter_mut().enumerate() {
        let members = &blocks[l * nb..(l + 1) * nb];
        loc.aggregates = AGGREGATES
            .iter()
            .map(|&(name, _, _)| {
                let mean = members.iter().map(|b| b.aggregates[name]).sum::<f64>() / nb as f64;
                (name.to_string(), mean.clamp(0.0, 1.0))
            })
            .collect();
    }

    // Households, enrollment and indicators.
    let mut rng = rng_stream(seed, 2);
    let members_dist = Poisson::<f64>::new(2.8).expect("poisson rate");
    let geo_noise =
        Normal::new(0.0, config.geocode_noise_deg.max(f64::MIN_POSITIVE)).expect("geocode noise");
    let pension = config
        .programs
        .iter()
        .find(|p| p.code == "senior_pension")
        .map(|p| p.program_id);
    let mut drafts: Vec<HouseholdDraft> = Vec::with_capacity(config.n_households);
    for h in 0..config.n_households {
        let true_block = rng.random_range(0..blocks.len());
        let block = &blocks[true_block];
        let loc_pos = true_block / nb;
        let loc = &localities[loc_pos];
        let locality_known = rng.random_bool(config.locality_known_fraction);
        let block_known = locality_known && rng.random_bool(config.block_known_fraction);
        let block_coords = block_known.then(|| {
            let jitter = |rng: &mut ChaCha8Rng| {
                if config.geocode_noise_deg > 0.0 {
                    geo_noise.sample(rng)
                } else {
                    0.0
                }
            };
            Coords {
                latitude: block.coords.latitude + jitter(&mut rng),
                longitude: block.coords.longitude + jitter(&mut rng),
            }
        });
        let n_members = (1.0 + members_dist.sample(&mut rng)).min(12.0) as u32;
        let development = block_dev[true_block];

        let enrolled: Vec<ProgramId> = config
            .programs
            .iter()
            .filter(|p| rng.random_bool(p.enrollment_rate))
            .map(|p| p.program_id)
            .collect();
        let mut indicators = [false; 6];
        for ind in PovertyIndicator::ALL {
            let p = sigmoid(indicator_logit(config, ind, development, &enrolled));
            indicators[ind.ordinal()] = rng.random_bool(p);
        }
        let senior = pension.is_some_and(|p| enrolled.contains(&p));
        let age = if senior {
            rng.random_range(65..=90)
        } else {
            rng.random_range(18..=75)
        } as f64;

        drafts.push(HouseholdDraft {
            household: Household {
                household_id: HouseholdId(h as u32 + 1),
                region_id: loc.region_id,
                locality_id: locality_known.then_some(loc.locality_id),
                block_id: block_known.then_some(block.block_id),
                block_coords,
                location_class: loc.location_class,
                n_members,
            },
            true_block,
            development,
            enrolled,
            indicators,
            age,
            propensity_logit: 0.0,
            surveyed: false,
            verified: false,
        });
    }

    // Who took the questionnaire and who got a home visit.
    let mut rng = rng_stream(seed, 3);
    for d in drafts.iter_mut() {
        d.surveyed = rng.random_bool(config.survey_fraction);
    }
    let mut surveyed: Vec<usize> = (0..drafts.len()).filter(|&i| drafts[i].surveyed).collect();
    surveyed.shuffle(&mut rng);
    let n_verified = (config.verification_fraction * surveyed.len() as f64).round() as usize;
    for &i in &surveyed[..n_verified] {
        drafts[i].verified = true;
    }

    // Truthful answers and misreporting propensity.
    let mut rng = rng_stream(seed, 4);
    let mut true_answers: Vec<BTreeMap<String, Answer>> = Vec::with_capacity(drafts.len());
    for d in drafts.iter_mut() {
        let answers = truthful_answers(d, config, &mut rng);
        let rooms = num(&answers, "rooms_reported");
        let meals = num(&answers, "meals_per_day");
        let food = (num(&answers, "food_spending").max(1.0).ln() - 900f64.ln()) / 0.5;
        d.propensity_logit = 0.9 * (d.age - 45.0) / 15.0 + 0.5 * (rooms - 3.0) / 1.5
            - 0.6 * (meals - 2.5)
            + 0.4 * food
            + 0.6 * std_normal.sample(&mut rng);
        true_answers.push(answers);
    }

    let plan = plan_discrepancies(config, &drafts, seed);

    // Reported answers, verification records, incomes, labels.
    let mut rng = rng_stream(seed, 7);
    let mut surveys = Vec::new();
    let mut verifications = Vec::new();
    for (i, d) in drafts.iter().enumerate() {
        if !d.surveyed {
            continue;
        }
        let mut answers = true_answers[i].clone();
        let mut entries: BTreeMap<String, VerificationOutcome> = schema::verifiable_questions()
            .map(|q| (q.id.to_string(), VerificationOutcome::Match))
            .collect();
        let mut n_under = 0;
        for &(q, outcome) in &plan[i] {
            misreport(&mut answers, q, outcome, &mut rng);
            entries.insert(q.to_string(), outcome);
            if outcome == VerificationOutcome::UnderReported {
                n_under += 1;
            }
        }
        for q in schema::SURVEY_SCHEMA.iter().filter(|q| !q.verifiable) {
            if rng.random_bool(config.answer_missing_rate) {
                answers.remove(q.id);
            }
        }
        let u = sigmoid(d.propensity_logit);
        if d.verified {
            let flag_p = sigmoid(-2.5 + 1.2 * n_under as f64 + 0.8 * d.propensity_logit);
            verifications.push(VerificationRecord {
                household_id: d.household.household_id,
                entries,
                surveyor_flag: rng.random_bool(flag_p),
            });
        }

        let lines = config.welfare_lines.for_class(d.household.location_class);
        let n_lacking = d.indicators.iter().filter(|&&b| b).count() as f64;
        let estimated = round_cents(
            lines.lbm
                * (0.15 + 0.3 * d.development - 0.15 * (n_lacking - 3.0)
                    + 0.3 * std_normal.sample(&mut rng))
                .exp(),
        );
        let shave: f64 = 0.6 * u * rng.random::<f64>();
        let self_reported = round_cents(estimated * (1.0 - shave));
        let indicator_labels = PovertyIndicator::ALL
            .into_iter()
            .map(|ind| {
                let label = if rng.random_bool(config.label_missing_rate) {
                    IndicatorLabel::Missing
                } else {
                    IndicatorLabel::from_bool(d.indicators[ind.ordinal()])
                };
                (ind, label)
            })
            .collect();
        surveys.push(CuisSurvey {
            household_id: d.household.household_id,
            answers,
            self_reported_income: self_reported,
            estimated_income: estimated,
            indicator_labels,
        });
    }

    let transactions = generate_transactions(config, &drafts, seed);

    let ground_truth = drafts
        .iter()
        .map(|d| GroundTruth {
            household_id: d.household.household_id,
            true_indicators: PovertyIndicator::ALL
                .into_iter()
                .map(|ind| (ind, d.indicators[ind.ordinal()]))
                .collect(),
            underreport_propensity: sigmoid(d.propensity_logit),
            development_level: d.development,
        })
        .collect();
    debug_assert!(drafts.iter().all(|d| d.true_block < blocks.len()));

    Ok(Corpus::new(
        config.clone(),
        drafts.into_iter().map(|d| d.household).collect(),
        surveys,
        verifications,
        transactions,
        localities,
        blocks,
        ground_truth,
    ))
}

fn num(answers: &BTreeMap<String, Answer>, q: &str) -> f64 {
    match answers.get(q) {
        Some(Answer::Numeric(x)) => *x,
        _ => 0.0,
    }
}

fn truthful_answers(
    d: &HouseholdDraft,
    config: &CorpusConfig,
    rng: &mut ChaCha8Rng,
) -> BTreeMap<String, Answer> {
    use PovertyIndicator::*;
    let lacks = |ind: PovertyIndicator| {
        if d.indicators[ind.ordinal()] {
            1.0
        } else {
            0.0
        }
    };
    let dev = d.development;
    let m = d.household.n_members as f64;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = BTreeMap::new();
    let boolean = |out: &mut BTreeMap<String, Answer>, id: &str, p: f64, rng: &mut ChaCha8Rng| {
        out.insert(
            id.to_string(),
            Answer::Boolean(rng.random_bool(p.clamp(0.0, 1.0))),
        );
    };
    let binom = |n: u64, p: f64, rng: &mut ChaCha8Rng| {
        Binomial::new(n, p.clamp(0.0, 1.0))
            .expect("binomial")
            .sample(rng) as f64
    };
    let pick = |levels: &[&str], weights: &[f64], rng: &mut ChaCha8Rng| {
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for (l, w) in levels.iter().zip(weights) {
            if u < *w {
                return l.to_string();
            }
            u -= w;
        }
        levels[levels.len() - 1].to_string()
    };

    boolean(
        &mut out,
        "owns_stove",
        sigmoid(0.6 + 1.0 * dev - 1.2 * lacks(DwellingQuality)),
        rng,
    );
    boolean(
        &mut out,
        "owns_air_conditioning",
        sigmoid(-1.8 + 0.8 * dev),
        rng,
    );
    boolean(
        &mut out,
        "owns_refrigerator",
        sigmoid(0.4 + 1.0 * dev - 0.8 * lacks(DwellingQuality)),
        rng,
    );
    boolean(
        &mut out,
        "owns_washing_machine",
        sigmoid(-0.4 + 0.9 * dev),
        rng,
    );
    boolean(&mut out, "owns_television", sigmoid(1.6 + 0.8 * dev), rng);
    let rooms_rate = (1.4 + 0.4 * dev - 0.9 * lacks(DwellingQuality)).max(0.3);
    let rooms = 1.0 + Poisson::new(rooms_rate).expect("poisson").sample(rng);
    out.insert("rooms_reported".into(), Answer::Numeric(rooms));
    let floor = if lacks(DwellingQuality) > 0.0 {
        pick(&["dirt", "cement", "tile"], &[0.6, 0.4, 0.0], rng)
    } else {
        pick(
            &["dirt", "cement", "tile"],
            &[0.03, 0.55, 0.42 + 0.1 * dev.max(0.0)],
            rng,
        )
    };
    out.insert("floor_material".into(), Answer::Categorical(floor));
    let wall = if lacks(DwellingQuality) > 0.0 {
        pick(&["cardboard", "adobe", "brick"], &[0.35, 0.55, 0.1], rng)
    } else {
        pick(&["cardboard", "adobe", "brick"], &[0.02, 0.2, 0.78], rng)
    };
    out.insert("wall_material".into(), Answer::Categorical(wall));
    let basic = lacks(BasicServices) > 0.0;
    boolean(
        &mut out,
        "has_piped_water",
        if basic { 0.35 } else { 0.97 },
        rng,
    );
    boolean(
        &mut out,
        "has_electricity",
        if basic { 0.75 } else { 0.995 },
        rng,
    );

    out.insert("respondent_age".into(), Answer::Numeric(d.age));
    out.insert("n_members_reported".into(), Answer::Numeric(m));
    let food_spending =
        (600.0 * m.powf(0.6) * (0.15 * dev - 0.35 * lacks(Food) + 0.3 * normal.sample(rng)).exp())
            .round();
    out.insert("food_spending".into(), Answer::Numeric(food_spending));
    let food = lacks(Food) > 0.0;
    let meals = if food {
        pick(&["1", "2", "3"], &[0.15, 0.6, 0.25], rng)
    } else {
        pick(&["1", "2", "3"], &[0.0, 0.2, 0.8], rng)
    };
    out.insert(
        "meals_per_day".into(),
        Answer::Numeric(meals.parse().expect("digit")),
    );
    let milk_program = config
        .programs
        .iter()
        .find(|p| p.code == "milk_distribution")
        .is_some_and(|p| d.enrolled.contains(&p.program_id));
    let freq = [
        ("vegetable_frequency", if food { 0.35 } else { 0.6 }),
        (
            "milk_frequency",
            (if food { 0.3 } else { 0.55 }) + if milk_program { 0.3 } else { 0.0 },
        ),
        ("fruit_frequency", if food { 0.25 } else { 0.5 }),
        ("meat_frequency", if food { 0.15 } else { 0.35 }),
    ];
    for (id, p) in freq {
        let v = binom(7, p, rng);
        out.insert(id.to_string(), Answer::Numeric(v));
    }
    let occupation = if d.age >= 65.0 && rng.random_bool(0.6) {
        "retired".to_string()
    } else {
        let rural = d.household.location_class == LocationClass::Rural;
        pick(
            &["agriculture", "formal", "informal", "unemployed"],
            &[
                if rural { 0.45 } else { 0.05 },
                0.25 * sigmoid(dev) * 2.0,
                0.4,
                0.1,
            ],
            rng,
        )
    };
    out.insert("occupation".into(), Answer::Categorical(occupation));
    let birth = pick(
        &["federal_district", "mexico_state", "other"],
        &[0.08, 0.14, 0.78],
        rng,
    );
    out.insert("state_of_birth".into(), Answer::Categorical(birth));
    let schooling = if lacks(Education) > 0.0 {
        pick(
            &["none", "primary", "secondary", "higher"],
            &[0.45, 0.5, 0.05, 0.0],
            rng,
        )
    } else {
        pick(
            &["none", "primary", "secondary", "higher"],
            &[0.02, 0.3, 0.5, 0.18],
            rng,
        )
    };
    out.insert("schooling_head".into(), Answer::Categorical(schooling));
    boolean(
        &mut out,
        "has_health_insurance",
        if lacks(HealthServices) > 0.0 {
            0.1
        } else {
            0.9
        },
        rng,
    );
    let kids = binom(
        (m as u64).saturating_sub(2),
        if lacks(Education) > 0.0 { 0.45 } else { 0.8 },
        rng,
    );
    out.insert("children_in_school".into(), Answer::Numeric(kids));
    boolean(
        &mut out,
        "has_drainage",
        if basic { 0.3 } else { 0.95 },
        rng,
    );
    boolean(&mut out, "owns_vehicle", sigmoid(-1.2 + 0.9 * dev), rng);
    debug_assert_eq!(out.len(), schema::SURVEY_SCHEMA.len());
    out
}

/// Decide, for every surveyed household, which verifiable questions carry a
/// discrepancy and in which direction.
fn plan_discrepancies(
    config: &CorpusConfig,
    drafts: &[HouseholdDraft],
    seed: u64,
) -> Vec<Vec<(&'static str, VerificationOutcome)>> {
    let mut rng = rng_stream(seed, 5);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let n = drafts.len();
    let score: Vec<f64> = drafts
        .iter()
        .map(|d| d.propensity_logit + 0.8 * normal.sample(&mut rng))
        .collect();
    let severity: Vec<f64> = drafts
        .iter()
        .map(|d| d.propensity_logit + normal.sample(&mut rng))
        .collect();

    let verified: Vec<usize> = (0..n).filter(|&i| drafts[i].verified).collect();
    let quota = (config.target_any_discrepancy_rate * verified.len() as f64).round() as usize;
    let (disc_verified, disc_cut) = top_by(&verified, &score, quota);
    let mut discrepant = vec![false; n];
    for &i in &disc_verified {
        discrepant[i] = true;
    }
    for i in 0..n {
        if drafts[i].surveyed && !drafts[i].verified {
            discrepant[i] = score[i] >= disc_cut;
        }
    }

    let many_quota =
        ((1.0 - config.target_leq3_share) * disc_verified.len() as f64).round() as usize;
    let (many_verified, many_cut) = top_by(&disc_verified, &severity, many_quota);
    let mut many = vec![false; n];
    for &i in &many_verified {
        many[i] = true;
    }
    for i in 0..n {
        if discrepant[i] && !drafts[i].verified {
            many[i] = severity[i] >= many_cut;
        }
    }

    let geometric = Geometric::new(0.55).expect("geometric");
    let mut plan: Vec<Vec<(&'static str, VerificationOutcome)>> = vec![Vec::new(); n];
    let mut chosen: Vec<Vec<&'static str>> = vec![Vec::new(); n];
    for i in 0..n {
        if !discrepant[i] {
            continue;
        }
        let k = if many[i] {
            4 + geometric.sample(&mut rng).min(6) as usize
        } else {
            match rng.random::<f64>() {
                u if u < 0.52 => 1,
                u if u < 0.82 => 2,
                _ => 3,
            }
        };
        chosen[i] = weighted_without_replacement(k, &mut rng);
    }

    // Direction of each discrepancy. Dignity questions on verified records
    // get an exact under-report quota; everything else is drawn.
    let mut rng = rng_stream(seed, 6);
    let mut dignity_slots: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let u = sigmoid(drafts[i].propensity_logit);
        for &q in &chosen[i] {
            let outcome = match config.bias_for(q) {
                Some(_) if drafts[i].verified => {
                    dignity_slots.entry(q).or_default().push(i);
                    VerificationOutcome::OverReported
                }
                Some(bias) => {
                    if rng.random_bool(bias) {
                        VerificationOutcome::OverReported
                    } else {
                        VerificationOutcome::UnderReported
                    }
                }
                None => {
                    if rng.random_bool((0.3 + 0.5 * u).clamp(0.0, 1.0)) {
                        VerificationOutcome::UnderReported
                    } else {
                        VerificationOutcome::OverReported
                    }
                }
            };
            plan[i].push((q, outcome));
        }
    }
    for (q, mut slots) in dignity_slots {
        let bias = config.bias_for(q).unwrap_or(1.0);
        let n_under = ((1.0 - bias) * slots.len() as f64).round() as usize;
        slots.shuffle(&mut rng);
        for &i in &slots[..n_under] {
            for entry in plan[i].iter_mut().filter(|e| e.0 == q) {
                entry.1 = VerificationOutcome::UnderReported;
            }
        }
    }
    debug_assert!(DIGNITY_QUESTIONS.len() == 2);
    plan
}

/// The `quota` members of `pool` with the highest `key` (ties by position),
/// plus the key of the last one admitted (`+inf` when nothing is admitted).
fn top_by(pool: &[usize], key: &[f64], quota: usize) -> (Vec<usize>, f64) {
    let mut sorted = pool.to_vec();
    sorted.sort_by(|&a, &b| key[b].total_cmp(&key[a]).then(a.cmp(&b)));
    sorted.truncate(quota);
    let cut = sorted.last().map_or(f64::INFINITY, |&i| key[i]);
    (sorted, cut)
}

fn weighted_without_replacement(k: usize, rng: &mut ChaCha8Rng) -> Vec<&'static str> {
    let mut pool: Vec<(&'static str, f64)> = DISCREPANCY_WEIGHTS.to_vec();
    let mut out = Vec::with_capacity(k);
    while out.len() < k && !pool.is_empty() {
        let total: f64 = pool.iter().map(|p| p.1).sum();
        let mut u = rng.random::<f64>() * total;
        let mut idx = pool.len() - 1;
        for (j, p) in pool.iter().enumerate() {
            if u < p.1 {
                idx = j;
                break;
            }
            u -= p.1;
        }
        out.push(pool.remove(idx).0);
    }
    out
}

/// Rewrite the reported answer so it differs from the verified value in the
/// given direction ("over" = a better situation than the one observed).
fn misreport(
    answers: &mut BTreeMap<String, Answer>,
    question: &str,
    outcome: VerificationOutcome,
    rng: &mut ChaCha8Rng,
) {
    let over = outcome == VerificationOutcome::OverReported;
    let spec = schema::question(question).expect("schema question");
    let current = answers.get(question).cloned();
    let reported = match (spec.kind, current) {
        (QuestionKind::Boolean, _) => Answer::Boolean(over),
        (QuestionKind::Numeric, Some(Answer::Numeric(x))) => {
            let step = rng.random_range(1..=2) as f64;
            Answer::Numeric(if over { x + step } else { (x - step).max(1.0) })
        }
        (QuestionKind::Categorical(levels), Some(Answer::Categorical(level))) => {
            let pos = levels.iter().position(|l| *l == level).unwrap_or(0);
            let new = if over {
                (pos + 1).min(levels.len() - 1)
            } else {
                pos.saturating_sub(1)
            };
            Answer::Categorical(levels[new].to_string())
        }
        (_, other) => other.unwrap_or(Answer::Numeric(1.0)),
    };
    answers.insert(question.to_string(), reported);
}

fn generate_transactions(
    config: &CorpusConfig,
    drafts: &[HouseholdDraft],
    seed: u64,
) -> Vec<PubTransaction> {
    let mut rng = rng_stream(seed, 8);
    let window = config.window;
    let months = window.months() as i32;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = Vec::new();
    for d in drafts {
        for p in config
            .programs
            .iter()
            .filter(|p| d.enrolled.contains(&p.program_id))
        {
            let interval = p.payment_interval_months as i32;
            let first = if rng.random_bool(0.8) {
                rng.random_range(0..interval.min(months))
            } else {
                rng.random_range(0..months)
            };
            let benefit = BenefitId(rng.random_range(1..=p.n_benefits));
            let scale = if p.code == "conditional_cash_transfer" {
                (d.household.n_members as f64 / 3.0).sqrt()
            } else {
                1.0
            };
            let day = (3 + 2 * p.program_id.0 as u32).min(28);
            let mut m = first;
            while m < months {
                let date = month_offset(window.start, m)
                    .with_day(day)
                    .expect("day <= 28 exists in every month");
                if window.contains(date) {
                    let amount = round_cents(
                        (p.base_amount * scale * (1.0 + 0.15 * normal.sample(&mut rng))).max(0.0),
                    );
                    out.push(PubTransaction {
                        household_id: d.household.household_id,
                        program_id: p.program_id,
                        benefit_id: benefit,
                        amount,
                        date,
                    });
                }
                m += interval;
            }
        }
    }
    out
}

fn month_offset(start: NaiveDate, months: i32) -> NaiveDate {
    let idx = start.year() * 12 + start.month0() as i32 + months;
    NaiveDate::from_ymd_opt(idx.div_euclid(12), idx.rem_euclid(12) as u32 + 1, 1)
        .expect("valid month")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> CorpusConfig {
        CorpusConfig {
            n_households: 2_000,
            n_regions: 4,
            n_localities: 40,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn empty_config_gives_empty_corpus() {
        let c = generate_corpus(&CorpusConfig {
            n_households: 0,
            ..Default::default()
        })
        .unwrap();
        assert!(c.households.is_empty() && c.surveys.is_empty() && c.transactions.is_empty());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = CorpusConfig {
            verification_fraction: 2.0,
            ..small(1)
        };
        assert!(matches!(generate_corpus(&cfg), Err(CorpusError::Config(_))));
    }

    #[test]
    fn same_seed_same_corpus() {
        assert_eq!(
            generate_corpus(&small(9)).unwrap(),
            generate_corpus(&small(9)).unwrap()
        );
        assert_ne!(
            generate_corpus(&small(9)).unwrap().surveys,
            generate_corpus(&small(10)).unwrap().surveys
        );
    }

    #[test]
    fn household_invariants_hold() {
        let c = generate_corpus(&small(3)).unwrap();
        for h in &c.households {
            if h.block_id.is_some() {
                assert!(h.locality_id.is_some());
            }
            assert_eq!(h.block_id.is_some(), h.block_coords.is_some());
            assert!(h.n_members >= 1);
        }
        for s in &c.surveys {
            assert!(s.self_reported_income >= 0.0 && s.estimated_income >= 0.0);
            assert!(s.self_reported_income <= s.estimated_income);
        }
        for t in &c.transactions {
            assert!(t.amount >= 0.0);
            assert!(c.config.window.contains(t.date));
        }
        for v in &c.verifications {
            for q in v.entries.keys() {
                assert!(schema::question(q).unwrap().verifiable);
            }
        }
        assert_eq!(c.ground_truth.len(), c.households.len());
    }

    #[test]
    fn top_by_reports_cut() {
        let key = [0.1, 0.9, 0.5, 0.7];
        let (sel, cut) = top_by(&[0, 1, 2, 3], &key, 2);
        assert_eq!(sel, vec![1, 3]);
        assert_eq!(cut, 0.7);
        assert_eq!(top_by(&[0, 1], &key, 0).1, f64::INFINITY);
    }

    #[test]
    fn misreport_moves_in_requested_direction() {
        let mut rng = rng_stream(1, 1);
        let mut a: BTreeMap<String, Answer> = BTreeMap::new();
        a.insert(
            "floor_material".into(),
            Answer::Categorical("cement".into()),
        );
        a.insert("rooms_reported".into(), Answer::Numeric(3.0));
        misreport(
            &mut a,
            "floor_material",
            VerificationOutcome::OverReported,
            &mut rng,
        );
        assert_eq!(a["floor_material"], Answer::Categorical("tile".into()));
        misreport(
            &mut a,
            "rooms_reported",
            VerificationOutcome::UnderReported,
            &mut rng,
        );
        assert!(matches!(a["rooms_reported"], Answer::Numeric(x) if x < 3.0));
        misreport(
            &mut a,
            "owns_stove",
            VerificationOutcome::OverReported,
            &mut rng,
        );
        assert_eq!(a["owns_stove"], Answer::Boolean(true));
    }
}
