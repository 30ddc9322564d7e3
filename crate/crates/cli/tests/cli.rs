use std::path::Path;
use std::process::{Command, Output};

fn povtriage(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_povtriage"))
        .args(args)
        .env("POVTRIAGE_OUTPUT_ROOT", root.join("default-root"))
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(o: &Output) -> String {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn corpus_experiment_and_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let data = root.join("data");
    let d = data.to_str().unwrap();
    ok(&povtriage(
        &[
            "corpus",
            "generate",
            "--n",
            "1200",
            "--seed",
            "5",
            "--regions",
            "2",
            "--out",
            d,
        ],
        root,
    ));
    assert!(ok(&povtriage(&["corpus", "validate", d], root)).starts_with("ok: 1200 households"));

    let programs = ok(&povtriage(
        &["report", "programs", "--corpus", d, "--indicator", "food"],
        root,
    ));
    assert!(programs.starts_with("program_id,code,count,proportion_lacking,ci_low,ci_high"));
    assert!(programs.lines().count() > 2);

    let config = root.join("exp.json");
    std::fs::write(
        &config,
        format!(
            r#"{{"corpus": {{"load": "{d}"}}, "tasks": ["education", "underreporting"],
               "models": ["majority", "gbm-10"], "feature_sets": ["combined"], "folds": 3, "seed": 2}}"#
        ),
    )
    .unwrap();
    let out = ok(&povtriage(
        &[
            "experiment",
            "run",
            "--config",
            config.to_str().unwrap(),
            "--parallelism",
            "1",
        ],
        root,
    ));
    assert!(out.contains("failed=0"), "{out}");
    // No output dir given: the run lands under the environment root.
    let runs: Vec<_> = std::fs::read_dir(root.join("default-root"))
        .unwrap()
        .collect();
    assert_eq!(runs.len(), 1);
    let run = runs[0].as_ref().unwrap().path();
    let r = run.to_str().unwrap();
    assert!(run.join("grid.csv").is_file());

    let status = ok(&povtriage(&["experiment", "status", r], root));
    assert_eq!(status.lines().count(), 2 * 2 * 2 + 1);
    assert!(status.contains("R1_education_gbm-10_combined"));

    let curves_path = root.join("out/curves.csv");
    ok(&povtriage(
        &[
            "report",
            "curves",
            "--run",
            r,
            "--region",
            "R1",
            "--task",
            "education",
            "--out",
            curves_path.to_str().unwrap(),
        ],
        root,
    ));
    let curves = std::fs::read_to_string(&curves_path).unwrap();
    // Two models, each a full grid of 101 thresholds.
    let rows: Vec<&str> = curves.lines().skip(1).filter(|l| !l.is_empty()).collect();
    assert!(
        rows.iter().any(|l| l.contains("majority")) && rows.iter().any(|l| l.contains("gbm-10"))
    );
    let one = ok(&povtriage(
        &[
            "report",
            "curves",
            "--run",
            r,
            "--region",
            "R1",
            "--task",
            "education",
            "--model",
            "gbm-10",
        ],
        root,
    ));
    assert!(!one.contains("majority"));

    let imp = ok(&povtriage(
        &[
            "report",
            "importances",
            "--run",
            r,
            "--region",
            "R2",
            "--task",
            "underreporting",
        ],
        root,
    ));
    assert!(imp.starts_with("job,feature,importance"));
    assert!(imp
        .lines()
        .skip(1)
        .all(|l| l.starts_with("R2_underreporting_gbm-10_combined,")));
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    for args in [
        vec!["corpus", "generate", "--bogus"],
        vec!["corpus", "validate", "/no/such/dir"],
        vec!["experiment", "run", "--config", "/no/such.json"],
        vec!["experiment", "status", "/no/such/run"],
        vec![
            "report",
            "curves",
            "--run",
            "/no/run",
            "--region",
            "R1",
            "--task",
            "education",
        ],
        vec![
            "report",
            "curves",
            "--run",
            "/no/run",
            "--region",
            "X",
            "--task",
            "education",
        ],
        vec!["serve", "--run", "/no/run"],
    ] {
        let o = povtriage(&args, root);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let bad = root.join("bad.json");
    std::fs::write(&bad, r#"{"tasks": []}"#).unwrap();
    assert_eq!(
        povtriage(
            &["experiment", "run", "--config", bad.to_str().unwrap()],
            root
        )
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn failed_jobs_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let config = root.join("exp.json");
    // Survey features cannot impute the indicators they are built from.
    std::fs::write(
        &config,
        r#"{"corpus": {"generate": {"n_households": 600, "n_regions": 1, "n_localities": 6, "seed": 3}},
            "tasks": ["education"], "models": ["majority"], "feature_sets": ["survey", "geographic"],
            "folds": 3, "seed": 1}"#,
    )
    .unwrap();
    let out_dir = root.join("run");
    let o = povtriage(
        &[
            "experiment",
            "run",
            "--config",
            config.to_str().unwrap(),
            "--output-dir",
            out_dir.to_str().unwrap(),
        ],
        root,
    );
    assert_eq!(
        o.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(String::from_utf8_lossy(&o.stdout).contains("failed=1"));
    let s = povtriage(&["experiment", "status", out_dir.to_str().unwrap()], root);
    assert_eq!(s.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&s.stdout).contains("R1_education_majority_survey\tfailed\t"));
}
