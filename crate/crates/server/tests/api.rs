use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use povtriage::corpus::{CorpusConfig, PovertyIndicator};
use povtriage::learners::ModelSpec;
use povtriage::orchestrator::{run, CorpusSource, ExperimentConfig, RunArtifacts};
use povtriage::triage::{rank, score_corpus, TriageWeights};
use povtriage::{FeatureSet, Task};
use povtriage_server::{router, AppState};

struct Fixture {
    _dir: tempfile::TempDir,
    run_dir: std::path::PathBuf,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let run_dir = dir.path().join("demo-run");
        let cfg = ExperimentConfig {
            corpus: CorpusSource::Generate(CorpusConfig {
                n_households: 1_500,
                n_regions: 1,
                n_localities: 12,
                seed: 8,
                ..Default::default()
            }),
            tasks: vec![
                Task::Underreporting,
                Task::Indicator(PovertyIndicator::Education),
            ],
            regions: None,
            models: vec![ModelSpec::gbm(10), ModelSpec::Majority],
            feature_sets: vec![FeatureSet::Combined],
            folds: 3,
            seed: 1,
            output_dir: Some(run_dir.clone()),
            parallelism: Some(1),
            grid_step: 0.01,
            apply_locality_filter: true,
        };
        assert!(!run(&cfg).unwrap().manifest.any_failed());
        Fixture { _dir: dir, run_dir }
    })
}

fn app() -> Router {
    router(Arc::new(
        AppState::load(&[fixture().run_dir.clone()]).unwrap(),
    ))
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (
        status,
        resp.into_body()
            .collect()
            .await
            .unwrap()
            .to_bytes()
            .to_vec(),
    )
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, b) = call(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (s, serde_json::from_slice(&b).unwrap())
}

async fn post(app: &Router, body: Value) -> (StatusCode, Value) {
    let req = Request::post("/api/rank")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (s, b) = call(app, req).await;
    (s, serde_json::from_slice(&b).unwrap())
}

fn ids(v: &Value) -> Vec<u64> {
    v["records"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["household_id"].as_u64().unwrap())
        .collect()
}

#[tokio::test]
async fn health_and_runs() {
    let app = app();
    let (s, v) = get(&app, "/healthz").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["runs"], json!(["demo-run"]));
    assert_eq!(v["formula_version"], "linear-v1");
    let (_, v) = get(&app, "/api/runs").await;
    assert_eq!(v["runs"][0]["jobs"].as_array().unwrap().len(), 4);
}

#[tokio::test]
async fn rank_matches_in_process_rank() {
    let app = app();
    let (s, v) = post(
        &app,
        json!({"weights": {"w_prob": 1, "w_discrepancy": 0, "w_proximity": 0}}),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(
        v["weights"],
        json!({"w_prob": 1.0, "w_discrepancy": 0.0, "w_proximity": 0.0})
    );
    assert_eq!(v["formula_version"], "linear-v1");

    let art = RunArtifacts::open(&fixture().run_dir).unwrap();
    let corpus = art.corpus().unwrap();
    let job = v["job"].as_str().unwrap();
    assert!(job.contains("underreporting"));
    let recs = score_corpus(&art.pipeline(job).unwrap(), &corpus).unwrap();
    let local = rank(&recs, &TriageWeights::new(1.0, 0.0, 0.0)).unwrap();
    let local_ids: Vec<u64> = local
        .records
        .iter()
        .map(|r| u64::from(r.record.household_id.0))
        .collect();
    assert_eq!(ids(&v), local_ids);

    // Three records, restricted after ranking.
    let three: Vec<u64> = local_ids.iter().rev().take(3).copied().collect();
    let (_, sub) = post(&app, json!({"weights": {"w_prob": 1, "w_discrepancy": 0, "w_proximity": 0}, "household_ids": three})).await;
    let expect: Vec<u64> = local_ids
        .iter()
        .filter(|i| three.contains(i))
        .copied()
        .collect();
    assert_eq!(ids(&sub), expect);
}

#[tokio::test]
async fn scaled_weights_keep_the_order() {
    let app = app();
    let (_, a) = post(
        &app,
        json!({"weights": {"w_prob": 0.5, "w_discrepancy": 0.3, "w_proximity": 0.2}}),
    )
    .await;
    let (_, b) = post(
        &app,
        json!({"weights": {"w_prob": 5, "w_discrepancy": 3, "w_proximity": 2}}),
    )
    .await;
    assert_eq!(ids(&a), ids(&b));
    assert_ne!(a["records"][0]["score"], b["records"][0]["score"]);
}

#[tokio::test]
async fn malformed_weights_are_400_with_field() {
    let app = app();
    for (weights, field) in [
        (
            json!({"w_prob": -1, "w_discrepancy": 0, "w_proximity": 0}),
            "w_prob",
        ),
        (
            json!({"w_prob": 1, "w_discrepancy": "x", "w_proximity": 0}),
            "w_discrepancy",
        ),
        (json!({"w_prob": 1, "w_discrepancy": 0}), "w_proximity"),
        (
            json!({"w_prob": 0, "w_discrepancy": 0, "w_proximity": 0}),
            "weights",
        ),
        (
            json!({"w_prob": 1, "w_discrepancy": 0, "w_proximity": 0, "tau": -5}),
            "tau",
        ),
        (
            json!({"w_prob": 1, "w_discrepancy": 0, "w_proximity": 0, "gamma": 1}),
            "gamma",
        ),
    ] {
        let (s, v) = post(&app, json!({ "weights": weights })).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{v}");
        assert_eq!(v["field"], field, "{v}");
    }
    let (s, v) = post(&app, json!({})).await;
    assert_eq!(
        (s, v["field"].as_str()),
        (StatusCode::BAD_REQUEST, Some("weights"))
    );
    let (s, _) = call(
        &app,
        Request::post("/api/rank")
            .body(Body::from("{nope"))
            .unwrap(),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn paging_and_filters() {
    let app = app();
    let (s, all) = get(&app, "/api/records?page_size=2").await;
    assert_eq!(s, StatusCode::OK);
    let total = all["total"].as_u64().unwrap();
    assert_eq!(all["n_pages"].as_u64().unwrap(), total.div_ceil(2));
    assert_eq!(all["records"].as_array().unwrap().len(), 2);
    let (_, faded) = get(&app, "/api/records?faded=true&page_size=10000").await;
    let (_, near) = get(&app, "/api/records?faded=false&page_size=10000").await;
    assert_eq!(
        faded["total"].as_u64().unwrap() + near["total"].as_u64().unwrap(),
        total
    );
    assert!(faded["records"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["faded"] == true));
    let (_, elig) = get(&app, "/api/records?eligible=true&page_size=10000").await;
    assert!(elig["records"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["distance_from_line"].as_f64().unwrap() < 0.0));
    let (s, _) = get(&app, "/api/records?page_size=0").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = get(&app, "/api/records?page=abc").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unknown_run_and_job_are_404() {
    let app = app();
    assert_eq!(
        get(&app, "/api/records?run=nope").await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        get(&app, "/api/curves?job=nope").await.0,
        StatusCode::NOT_FOUND
    );
    let (s, _) = post(
        &app,
        json!({"run": "nope", "weights": {"w_prob": 1, "w_discrepancy": 0, "w_proximity": 0}}),
    )
    .await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(
        get(&app, "/api/importances?model=majority").await.0,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test]
async fn curves_and_importances() {
    let app = app();
    let (s, v) = get(&app, "/api/curves?task=education&model=gbm-10").await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(
        v["result"]["pooled"]["points"].as_array().unwrap().len(),
        101
    );
    let (s, v) = get(&app, "/api/importances?task=underreporting&model=gbm-10").await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert!(!v["importances"].as_array().unwrap().is_empty());
    let (s, v) = post(&app, json!({"task": "education", "weights": {"w_prob": 1, "w_discrepancy": 0, "w_proximity": 0}})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST, "{v}");
}

#[tokio::test]
async fn identical_requests_give_identical_bytes() {
    let app = app();
    let body =
        json!({"weights": {"w_prob": 0.7, "w_discrepancy": 0.2, "w_proximity": 0.4, "tau": 800}})
            .to_string();
    let req = || {
        Request::post("/api/rank")
            .body(Body::from(body.clone()))
            .unwrap()
    };
    let (a, b) = (call(&app, req()).await, call(&app, req()).await);
    assert_eq!(a.0, StatusCode::OK);
    assert_eq!(a.1, b.1);
}

#[tokio::test]
async fn cross_origin_clients_are_allowed() {
    let app = app();
    let req = Request::options("/api/rank")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .header("access-control-request-headers", "content-type")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert_eq!(resp.headers()["access-control-allow-origin"], "*");
}
