//! `povtriage` command line: corpus generation, experiment runs, reports and
//! the triage API server.

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use povtriage::corpus::{
    apply_locality_filter, generate_corpus, load_corpus, save_corpus, validate_corpus,
    CorpusConfig, PovertyIndicator, RegionId,
};
use povtriage::eval::{program_indicator_table, EvalGrid};
use povtriage::orchestrator::{self, ExperimentConfig, RunArtifacts, RunManifest, MANIFEST_FILE};
use povtriage::{FeatureSet, Task};
use povtriage_server::AppState;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{0} job(s) failed")]
    JobsFailed(usize),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) | CliError::JobsFailed(_) => 1,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "povtriage",
    version,
    about = "Poverty indicator prediction and triage"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or check a synthetic corpus.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Run or inspect an experiment grid.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
    /// Export tables from a finished run or a corpus.
    #[command(subcommand)]
    Report(ReportCmd),
    /// Serve the triage API over one or more run directories.
    Serve {
        #[arg(long = "run", required = true, num_args = 1..)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

#[derive(Subcommand)]
enum CorpusCmd {
    Generate {
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        regions: Option<usize>,
        #[arg(long)]
        localities: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    Validate {
        dir: PathBuf,
    },
}

#[derive(Subcommand)]
enum ExperimentCmd {
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        parallelism: Option<usize>,
    },
    Status {
        run_dir: PathBuf,
    },
}

#[derive(Args)]
struct JobFilter {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    region: RegionId,
    #[arg(long)]
    task: Task,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    feature_set: Option<FeatureSet>,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ReportCmd {
    Curves(JobFilter),
    Importances(JobFilter),
    Programs {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "education")]
        indicator: PovertyIndicator,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Corpus(CorpusCmd::Generate {
            n,
            seed,
            regions,
            localities,
            out,
        }) => {
            let mut cfg = CorpusConfig {
                n_households: n,
                seed,
                ..Default::default()
            };
            if let Some(r) = regions {
                cfg.n_regions = r;
            }
            cfg.n_localities = localities.unwrap_or(cfg.n_localities.max(cfg.n_regions));
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let corpus = generate_corpus(&cfg).map_err(runtime)?;
            save_corpus(&corpus, &out).map_err(runtime)?;
            println!(
                "wrote {} households ({} surveyed) to {}",
                corpus.households.len(),
                corpus.surveys.len(),
                out.display()
            );
            Ok(())
        }
        Command::Corpus(CorpusCmd::Validate { dir }) => {
            require(&dir)?;
            let c = load_corpus(&dir).map_err(runtime)?;
            validate_corpus(&c).map_err(runtime)?;
            println!(
                "ok: {} households, {} surveys",
                c.households.len(),
                c.surveys.len()
            );
            Ok(())
        }
        Command::Experiment(ExperimentCmd::Run {
            config,
            output_dir,
            parallelism,
        }) => {
            require(&config)?;
            let mut cfg =
                ExperimentConfig::from_file(&config).map_err(|e| CliError::Usage(e.to_string()))?;
            if output_dir.is_some() {
                cfg.output_dir = output_dir;
            }
            if parallelism.is_some() {
                cfg.parallelism = parallelism;
            }
            let report = orchestrator::run(&cfg).map_err(runtime)?;
            println!("{}: {}", report.dir.display(), report.manifest.summary());
            failures(&report.manifest)
        }
        Command::Experiment(ExperimentCmd::Status { run_dir }) => {
            require(&run_dir.join(MANIFEST_FILE))?;
            let m = RunManifest::read(&run_dir).map_err(runtime)?;
            for j in &m.jobs {
                match &j.status {
                    orchestrator::JobStatus::Degenerate { reason }
                    | orchestrator::JobStatus::Failed { reason } => {
                        println!("{}\t{}\t{}", j.id, j.status.name(), reason)
                    }
                    s => println!("{}\t{}", j.id, s.name()),
                }
            }
            println!("{}", m.summary());
            failures(&m)
        }
        Command::Report(ReportCmd::Curves(f)) => {
            let art = open_run(&f.run)?;
            let mut grid = EvalGrid::default();
            for id in matching(&art, &f)? {
                grid.insert_cv(&art.cv_result(&id).map_err(runtime)?);
            }
            let mut buf = Vec::new();
            grid.write_csv(&mut buf).map_err(runtime)?;
            emit(f.out.as_deref(), &buf)
        }
        Command::Report(ReportCmd::Importances(f)) => {
            let art = open_run(&f.run)?;
            let ids = matching(&art, &f)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["job", "feature", "importance"])
                .map_err(runtime)?;
            let mut any = false;
            for id in &ids {
                let Ok(imp) = art.importances(id) else {
                    continue;
                };
                any = true;
                for (name, v) in imp {
                    w.write_record([id.as_str(), &name, &v.to_string()])
                        .map_err(runtime)?;
                }
            }
            if !any {
                return Err(CliError::Runtime(
                    "no matching job has feature importances".into(),
                ));
            }
            emit(f.out.as_deref(), &w.into_inner().map_err(runtime)?)
        }
        Command::Report(ReportCmd::Programs {
            corpus,
            indicator,
            out,
        }) => {
            require(&corpus)?;
            let c = apply_locality_filter(&load_corpus(&corpus).map_err(runtime)?);
            let t = program_indicator_table(&c, indicator);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "program_id",
                "code",
                "count",
                "proportion_lacking",
                "ci_low",
                "ci_high",
            ])
            .map_err(runtime)?;
            for r in &t.rows {
                w.write_record([
                    r.program_id.to_string(),
                    r.code.clone(),
                    r.count.to_string(),
                    r.proportion_lacking.to_string(),
                    r.ci_low.to_string(),
                    r.ci_high.to_string(),
                ])
                .map_err(runtime)?;
            }
            emit(out.as_deref(), &w.into_inner().map_err(runtime)?)
        }
        Command::Serve { runs, addr } => {
            for r in &runs {
                require(&r.join(MANIFEST_FILE))?;
            }
            let state = AppState::load(&runs).map_err(runtime)?;
            let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
            rt.block_on(povtriage_server::serve(state, addr))
                .map_err(runtime)
        }
    }
}

fn require(p: &Path) -> Result<()> {
    if p.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "{}: no such file or directory",
            p.display()
        )))
    }
}

fn failures(m: &RunManifest) -> Result<()> {
    let n = m
        .jobs
        .iter()
        .filter(|j| matches!(j.status, orchestrator::JobStatus::Failed { .. }))
        .count();
    if n > 0 {
        Err(CliError::JobsFailed(n))
    } else {
        Ok(())
    }
}

fn open_run(dir: &Path) -> Result<RunArtifacts> {
    require(&dir.join(MANIFEST_FILE))?;
    RunArtifacts::open(dir).map_err(runtime)
}

/// Finished jobs for the filter, in manifest order.
fn matching(art: &RunArtifacts, f: &JobFilter) -> Result<Vec<String>> {
    let ids: Vec<String> = art
        .manifest
        .jobs
        .iter()
        .filter(|j| j.region == f.region && j.task == f.task && j.status.is_finished())
        .filter(|j| f.model.as_deref().is_none_or(|m| j.model == m))
        .filter(|j| f.feature_set.is_none_or(|s| j.feature_set == s))
        .map(|j| j.id.clone())
        .collect();
    if ids.is_empty() {
        return Err(CliError::Runtime(format!(
            "no finished job for region {} task {}",
            f.region, f.task
        )));
    }
    Ok(ids)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(runtime)?;
            }
            fs::write(p, bytes).map_err(runtime)?;
            println!("wrote {}", p.display());
            Ok(())
        }
        None => std::io::stdout().write_all(bytes).map_err(runtime),
    }
}
