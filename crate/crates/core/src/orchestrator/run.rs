use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use super::{
    io_err, write_atomic, CorpusSource, ExperimentConfig, JobEntry, JobStatus, OrchestratorError,
    RunManifest,
};
use crate::corpus::{
    apply_locality_filter, generate_corpus, load_corpus, save_corpus, Corpus, RegionId,
};
use crate::eval::{cv_rows_csv, make_grouped_folds, run_cv, CvResult, EvalGrid, FoldAssignment};
use crate::learners::{LearnerError, ModelSpec};
use crate::pipeline::{average_rows, rows_digest, task_data, PipelineError, TrainedPipeline};
use crate::util::mix_seed;

pub const GRID_FILE: &str = "grid.csv";
const CORPUS_SUBDIR: &str = "corpus";

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    /// Jobs executed by this call (finished jobs from earlier runs are not).
    pub executed: usize,
}

/// Every job of the grid, regions outermost.
pub fn plan(config: &ExperimentConfig, regions: &[RegionId]) -> Vec<JobEntry> {
    let mut jobs = Vec::new();
    for &r in regions {
        for &t in &config.tasks {
            for m in &config.models {
                for &fs in &config.feature_sets {
                    jobs.push(JobEntry::new(r, t, m.id(), fs));
                }
            }
        }
    }
    jobs
}

fn prepare_corpus(
    config: &ExperimentConfig,
    dir: &Path,
) -> Result<(Corpus, PathBuf), OrchestratorError> {
    let (corpus, rel) = match &config.corpus {
        CorpusSource::Generate(c) => {
            let corpus = generate_corpus(c)?;
            let target = dir.join(CORPUS_SUBDIR);
            if !target.join("corpus_meta.json").exists() {
                save_corpus(&corpus, &target)?;
            }
            (corpus, PathBuf::from(CORPUS_SUBDIR))
        }
        CorpusSource::Load(p) => (load_corpus(p)?, std::path::absolute(p).map_err(io_err(p))?),
    };
    let corpus = if config.apply_locality_filter {
        apply_locality_filter(&corpus)
    } else {
        corpus
    };
    Ok((corpus, rel))
}

/// Runs every unfinished job. A job failure is recorded in the manifest
/// and does not stop the run; errors are returned only for problems that
/// prevent the run as a whole.
pub fn run(config: &ExperimentConfig) -> Result<RunReport, OrchestratorError> {
    config.validate()?;
    let dir = config.resolve_output_dir();
    std::fs::create_dir_all(dir.join("jobs")).map_err(io_err(&dir))?;

    let previous = match RunManifest::read(&dir) {
        Ok(m) => Some(m),
        Err(OrchestratorError::Io { source, .. })
            if source.kind() == std::io::ErrorKind::NotFound =>
        {
            None
        }
        Err(e) => return Err(e),
    };
    if previous
        .as_ref()
        .is_some_and(|m| m.config_fingerprint != config.fingerprint())
    {
        return Err(OrchestratorError::ConfigMismatch(dir));
    }

    let (corpus, corpus_dir) = prepare_corpus(config, &dir)?;
    let available = corpus.regions();
    let regions = match &config.regions {
        Some(r) => {
            if let Some(&missing) = r.iter().find(|x| !available.contains(x)) {
                return Err(OrchestratorError::UnknownRegion(missing));
            }
            r.clone()
        }
        None => available,
    };

    let mut jobs = plan(config, &regions);
    if let Some(prev) = &previous {
        for j in &mut jobs {
            if let Some(old) = prev.job(&j.id) {
                if old.status.is_finished() && dir.join(old.dir()).is_dir() {
                    *j = old.clone();
                }
            }
        }
    }
    let mut manifest = RunManifest::new(config.clone(), corpus_dir, jobs);
    manifest.write(&dir)?;

    // A region too small to split fails its own jobs only.
    let folds: BTreeMap<RegionId, Result<FoldAssignment, String>> = regions
        .iter()
        .map(|&r| {
            let f = make_grouped_folds(
                corpus.households_in(r),
                config.folds,
                mix_seed(config.seed, u64::from(r.0)),
            );
            (r, f.map_err(|e| e.to_string()))
        })
        .collect();
    let specs: BTreeMap<String, ModelSpec> = config
        .models
        .iter()
        .map(|m| (m.id(), m.with_seed(config.seed)))
        .collect();

    let pending: Vec<usize> = (0..manifest.jobs.len())
        .filter(|&i| !manifest.jobs[i].status.is_finished())
        .collect();
    let next = AtomicUsize::new(0);
    let workers = config.worker_count().min(pending.len()).max(1);
    log::info!(
        "{} of {} jobs to run on {workers} workers",
        pending.len(),
        manifest.jobs.len()
    );

    let snapshot = manifest.jobs.clone();
    let (tx, rx) = mpsc::channel::<(usize, JobEntry)>();
    std::thread::scope(|s| -> Result<(), OrchestratorError> {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, pending, jobs) = (&next, &pending, &snapshot);
            let (corpus, folds, specs, dir) = (&corpus, &folds, &specs, &dir);
            s.spawn(move || {
                while let Some(&i) = pending.get(next.fetch_add(1, Ordering::SeqCst)) {
                    let job = &jobs[i];
                    let spec = &specs[&job.model];
                    let started = Instant::now();
                    let outcome = catch_unwind(AssertUnwindSafe(|| match &folds[&job.region] {
                        Ok(f) => execute(job, spec, f, corpus, config, dir),
                        Err(e) => Err(OrchestratorError::Config(e.clone())),
                    }));
                    let mut done = match outcome {
                        Ok(Ok(entry)) => entry,
                        Ok(Err(e)) => failed(job, e.to_string()),
                        Err(panic) => {
                            let msg = panic
                                .downcast_ref::<String>()
                                .cloned()
                                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                                .unwrap_or_else(|| "panic".into());
                            failed(job, format!("panicked: {msg}"))
                        }
                    };
                    done.wall_clock_secs = Some(started.elapsed().as_secs_f64());
                    if tx.send((i, done)).is_err() {
                        break;
                    }
                }
            });
        }
        drop(tx);
        // Single writer: the manifest only changes here.
        for (i, entry) in rx {
            match &entry.status {
                JobStatus::Failed { reason } => log::warn!("job {} failed: {reason}", entry.id),
                st => log::info!("job {} {}", entry.id, st.name()),
            }
            manifest.jobs[i] = entry;
            manifest.write(&dir)?;
        }
        Ok(())
    })?;

    write_grid(&manifest, &dir)?;
    Ok(RunReport {
        dir,
        manifest,
        executed: pending.len(),
    })
}

fn failed(job: &JobEntry, reason: String) -> JobEntry {
    let mut e = job.clone();
    e.status = JobStatus::Failed { reason };
    e.artifacts.clear();
    e
}

/// One job, as a function of the corpus and config. Artifacts are written
/// to a scratch directory that is renamed into place when complete.
fn execute(
    job: &JobEntry,
    spec: &ModelSpec,
    folds: &FoldAssignment,
    corpus: &Corpus,
    config: &ExperimentConfig,
    run_dir: &Path,
) -> Result<JobEntry, OrchestratorError> {
    let rel = job.dir();
    let target = run_dir.join(&rel);
    let scratch = run_dir.join(format!("{}.partial", rel.display()));
    for d in [&scratch, &target] {
        if d.exists() {
            std::fs::remove_dir_all(d).map_err(io_err(d))?;
        }
    }
    std::fs::create_dir_all(&scratch).map_err(io_err(&scratch))?;
    let put = |name: &str, bytes: &[u8]| -> Result<String, OrchestratorError> {
        let p = scratch.join(name);
        std::fs::write(&p, bytes).map_err(io_err(&p))?;
        Ok(rel.join(name).to_string_lossy().into_owned())
    };

    let mut cv = run_cv(
        job.task,
        job.region,
        spec,
        job.feature_set,
        folds,
        corpus,
        config.grid_step,
    )?;
    let mut entry = job.clone();
    entry
        .artifacts
        .push(put("curves.csv", cv_rows_csv(&cv).as_bytes())?);
    let mut archive = String::from("household_id,fold,score,label\n");
    for a in &cv.archive {
        archive.push_str(&format!(
            "{},{},{},{}\n",
            a.household_id,
            a.fold,
            a.score,
            u8::from(a.label)
        ));
    }
    entry
        .artifacts
        .push(put("archive.csv", archive.as_bytes())?);

    let mut training = cv.training_regions.clone();
    let mut digest = cv.training_rows_digest.clone();
    entry.status = match &cv.degenerate {
        Some(reason) => JobStatus::Degenerate {
            reason: reason.clone(),
        },
        None => {
            // Final model on every labelled row of the region, for scoring.
            let data = task_data(corpus, job.task, Some(job.region));
            let avg = average_rows(corpus, job.task, Some(job.region), &data.ids, &[]);
            let pipe = TrainedPipeline::fit(
                corpus,
                job.task,
                job.feature_set,
                Some(job.region),
                spec,
                &data.ids,
                &data.labels,
                &avg,
            )?;
            let mut used: Vec<_> = data.ids.iter().chain(&avg).copied().collect();
            used.sort_unstable();
            used.dedup();
            training.extend(
                used.iter()
                    .filter_map(|&id| corpus.household(id).map(|h| h.region_id)),
            );
            digest = rows_digest(&used);
            entry
                .artifacts
                .push(put("pipeline.json", pipe.to_json().as_bytes())?);
            match pipe.model.importances() {
                Ok(report) => {
                    let mut imp = String::from("feature,importance\n");
                    for (name, v) in report.ranked() {
                        imp.push_str(&format!("{name},{v}\n"));
                    }
                    entry
                        .artifacts
                        .push(put("importances.csv", imp.as_bytes())?);
                }
                Err(LearnerError::Unsupported(_)) => {}
                Err(e) => return Err(PipelineError::from(e).into()),
            }
            JobStatus::Done
        }
    };
    cv.archive.clear();
    entry.artifacts.push(put(
        "cv.json",
        serde_json::to_string(&cv)
            .expect("results serialize")
            .as_bytes(),
    )?);
    std::fs::rename(&scratch, &target).map_err(io_err(&target))?;
    entry.training_regions = training.into_iter().collect();
    entry.training_rows_digest = Some(digest);
    Ok(entry)
}

/// Rebuild the grid export from every finished job's results.
fn write_grid(manifest: &RunManifest, dir: &Path) -> Result<(), OrchestratorError> {
    let mut grid = EvalGrid::default();
    for j in manifest.jobs.iter().filter(|j| j.status.is_finished()) {
        let path = dir.join(j.dir()).join("cv.json");
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let cv: CvResult = serde_json::from_str(&text)
            .map_err(|source| OrchestratorError::Json { path, source })?;
        grid.insert_cv(&cv);
    }
    let mut buf = Vec::new();
    grid.write_csv(&mut buf)
        .map_err(|e| OrchestratorError::Config(format!("grid export: {e}")))?;
    write_atomic(&dir.join(GRID_FILE), &buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CorpusConfig, PovertyIndicator};
    use crate::task::{FeatureSet, Task};

    fn config(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            corpus: CorpusSource::Generate(CorpusConfig {
                n_households: 900,
                n_regions: 2,
                n_localities: 12,
                seed: 3,
                ..Default::default()
            }),
            tasks: vec![
                Task::Indicator(PovertyIndicator::Education),
                Task::Underreporting,
            ],
            regions: None,
            models: vec![ModelSpec::Majority, ModelSpec::gbm(10)],
            feature_sets: vec![FeatureSet::Geographic, FeatureSet::Transactional],
            folds: 3,
            seed: 1,
            output_dir: Some(dir.to_path_buf()),
            parallelism: Some(3),
            grid_step: 0.05,
            apply_locality_filter: true,
        }
    }

    #[test]
    fn product_count_and_idempotent_rerun() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = config(tmp.path());
        let first = run(&cfg).unwrap();
        assert_eq!(first.manifest.jobs.len(), 2 * 2 * 2 * 2);
        assert_eq!(first.executed, 16);
        assert!(!first.manifest.any_failed(), "{:#?}", first.manifest.jobs);
        let again = run(&cfg).unwrap();
        assert_eq!(again.executed, 0);
        assert_eq!(again.manifest, first.manifest);
    }

    #[test]
    fn jobs_see_only_their_region() {
        let tmp = tempfile::tempdir().unwrap();
        let report = run(&config(tmp.path())).unwrap();
        let mut done = 0;
        for j in &report.manifest.jobs {
            if j.status == JobStatus::Done {
                done += 1;
                assert_eq!(j.training_regions, vec![j.region], "{}", j.id);
            } else {
                assert!(
                    j.training_regions.iter().all(|&r| r == j.region),
                    "{}",
                    j.id
                );
            }
        }
        assert!(done >= 8, "{}", report.manifest.summary());
    }

    #[test]
    fn identical_config_gives_identical_grid() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let mut cb = config(b.path());
        cb.parallelism = Some(1);
        run(&config(a.path())).unwrap();
        run(&cb).unwrap();
        let ga = std::fs::read(a.path().join(GRID_FILE)).unwrap();
        let gb = std::fs::read(b.path().join(GRID_FILE)).unwrap();
        assert!(!ga.is_empty());
        assert_eq!(ga, gb);
    }

    #[test]
    fn interrupted_run_converges_to_the_same_manifest() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let full = run(&config(a.path())).unwrap();

        let cfg = config(b.path());
        run(&cfg).unwrap();
        // Simulate a kill: some jobs still pending, one half-written.
        let mut m = RunManifest::read(b.path()).unwrap();
        for j in m.jobs.iter_mut().skip(5) {
            j.status = JobStatus::Pending;
        }
        let torn = b.path().join(m.jobs[7].dir());
        std::fs::remove_file(torn.join("cv.json")).unwrap();
        std::fs::rename(
            &torn,
            b.path()
                .join(format!("{}.partial", m.jobs[7].dir().display())),
        )
        .unwrap();
        m.write(b.path()).unwrap();
        std::fs::remove_file(b.path().join(GRID_FILE)).unwrap();

        let resumed = run(&cfg).unwrap();
        assert_eq!(resumed.executed, 11);
        let strip = |m: &RunManifest| {
            let mut m = m.without_timings();
            m.config.output_dir = None;
            m
        };
        assert_eq!(strip(&resumed.manifest), strip(&full.manifest));
        assert_eq!(
            std::fs::read(a.path().join(GRID_FILE)).unwrap(),
            std::fs::read(b.path().join(GRID_FILE)).unwrap()
        );
    }

    #[test]
    fn failures_are_recorded_and_the_run_continues() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = config(tmp.path());
        // Survey answers are not allowed as features for imputation.
        cfg.feature_sets = vec![FeatureSet::Survey];
        let report = run(&cfg).unwrap();
        assert!(report.manifest.any_failed());
        for j in &report.manifest.jobs {
            match (&j.task, &j.status) {
                (Task::Indicator(_), JobStatus::Failed { reason }) => {
                    assert!(reason.contains("survey"), "{reason}")
                }
                (Task::Underreporting, s) => assert!(s.is_finished(), "{s:?}"),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn different_config_in_same_directory_is_refused() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = config(tmp.path());
        cfg.models = vec![ModelSpec::Majority];
        cfg.tasks.truncate(1);
        cfg.feature_sets.truncate(1);
        run(&cfg).unwrap();
        cfg.seed = 99;
        assert!(matches!(
            run(&cfg),
            Err(OrchestratorError::ConfigMismatch(_))
        ));
    }

    #[test]
    fn unknown_region_is_a_config_error() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = config(tmp.path());
        cfg.regions = Some(vec![RegionId(40)]);
        assert!(matches!(
            run(&cfg),
            Err(OrchestratorError::UnknownRegion(RegionId(40)))
        ));
    }

    #[test]
    fn replica_scale_plan() {
        let cfg = ExperimentConfig {
            tasks: PovertyIndicator::ALL
                .iter()
                .map(|&i| Task::Indicator(i))
                .collect(),
            models: ["knn-12", "knn-25", "gbm-100", "gbm-150", "rf-50", "rf-100"]
                .iter()
                .map(|m| m.parse().unwrap())
                .collect(),
            feature_sets: vec![
                FeatureSet::Geographic,
                FeatureSet::Socioeconomic,
                FeatureSet::Transactional,
                FeatureSet::Combined,
            ],
            ..config(Path::new("unused"))
        };
        let regions: Vec<RegionId> = (1..=34).map(RegionId).collect();
        let jobs = plan(&cfg, &regions);
        assert_eq!(jobs.len(), 34 * 6 * 6 * 4);
        let ids: std::collections::BTreeSet<_> = jobs.iter().map(|j| &j.id).collect();
        assert_eq!(ids.len(), jobs.len());
    }

    #[test]
    fn artifacts_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let report = run(&config(tmp.path())).unwrap();
        let art = super::super::RunArtifacts::open(tmp.path()).unwrap();
        let corpus = art.corpus().unwrap();
        let job = report
            .manifest
            .jobs
            .iter()
            .find(|j| j.status == JobStatus::Done && j.model == "gbm-10")
            .unwrap();
        let pipe = art.pipeline(&job.id).unwrap();
        let ids = &corpus.households_in(job.region)[..5];
        assert_eq!(pipe.score(&corpus, ids).unwrap().len(), 5);
        assert!(art.curves_csv(&job.id).unwrap().starts_with("region,task"));
        assert!(!art.importances(&job.id).unwrap().is_empty());
        assert!(art.cv_result(&job.id).unwrap().pooled.is_some());
        assert!(matches!(
            art.job("nope"),
            Err(OrchestratorError::UnknownJob(_))
        ));
    }
}
