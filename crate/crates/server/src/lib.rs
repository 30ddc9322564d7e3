//! HTTP JSON API over one or more finished run directories: triage records,
//! weighted ranking, evaluation curves and feature importances.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Query, State};
use axum::http::{header, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{Any, CorsLayer};

use povtriage::corpus::{Corpus, HouseholdId, RegionId};
use povtriage::orchestrator::{JobEntry, OrchestratorError, RunArtifacts};
use povtriage::triage::{
    page_records, rank, score_corpus, RecordQuery, TriageError, TriageRecord, TriageWeights,
    FORMULA_VERSION,
};
use povtriage::{FeatureSet, Task};

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("no run directories given")]
    NoRuns,
    #[error("two runs share the id `{0}`")]
    DuplicateRun(String),
    #[error("{path}: {source}")]
    Run {
        path: PathBuf,
        #[source]
        source: OrchestratorError,
    },
}

/// A loaded run: manifest, corpus and lazily scored triage records.
pub struct Run {
    pub id: String,
    pub artifacts: RunArtifacts,
    pub corpus: Corpus,
    records: Mutex<HashMap<String, Arc<Vec<TriageRecord>>>>,
}

impl Run {
    pub fn open(dir: &Path) -> Result<Run, ServerError> {
        let err = |source| ServerError::Run {
            path: dir.to_path_buf(),
            source,
        };
        let artifacts = RunArtifacts::open(dir).map_err(err)?;
        let corpus = artifacts.corpus().map_err(err)?;
        let id = dir
            .canonicalize()
            .ok()
            .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .unwrap_or_else(|| dir.display().to_string());
        Ok(Run {
            id,
            artifacts,
            corpus,
            records: Mutex::new(HashMap::new()),
        })
    }

    fn records(&self, job: &str) -> Result<Arc<Vec<TriageRecord>>, ApiError> {
        if let Some(r) = self.records.lock().expect("cache lock").get(job) {
            return Ok(r.clone());
        }
        let pipe = self.artifacts.pipeline(job).map_err(ApiError::from)?;
        let recs = Arc::new(score_corpus(&pipe, &self.corpus).map_err(ApiError::from)?);
        self.records
            .lock()
            .expect("cache lock")
            .insert(job.to_string(), recs.clone());
        Ok(recs)
    }
}

pub struct AppState {
    runs: BTreeMap<String, Run>,
    default_run: String,
}

impl AppState {
    pub fn new(runs: Vec<Run>) -> Result<AppState, ServerError> {
        let default_run = runs.first().ok_or(ServerError::NoRuns)?.id.clone();
        let mut map = BTreeMap::new();
        for r in runs {
            if map.contains_key(&r.id) {
                return Err(ServerError::DuplicateRun(r.id));
            }
            map.insert(r.id.clone(), r);
        }
        Ok(AppState {
            runs: map,
            default_run,
        })
    }

    pub fn load(dirs: &[PathBuf]) -> Result<AppState, ServerError> {
        Self::new(
            dirs.iter()
                .map(|d| Run::open(d))
                .collect::<Result<_, _>>()?,
        )
    }

    fn run(&self, id: Option<&str>) -> Result<&Run, ApiError> {
        let id = id.unwrap_or(&self.default_run);
        self.runs
            .get(id)
            .ok_or_else(|| ApiError::not_found(format!("unknown run `{id}`")))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    field: Option<String>,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
            field: None,
        }
    }

    fn field(field: &str, message: impl Into<String>) -> Self {
        ApiError {
            field: Some(field.to_string()),
            ..Self::bad_request(message)
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
            field: None,
        }
    }
}

impl From<OrchestratorError> for ApiError {
    fn from(e: OrchestratorError) -> Self {
        match e {
            OrchestratorError::UnknownJob(_) | OrchestratorError::NoPipeline(_) => {
                ApiError::not_found(e.to_string())
            }
            other => ApiError {
                status: StatusCode::INTERNAL_SERVER_ERROR,
                message: other.to_string(),
                field: None,
            },
        }
    }
}

impl From<TriageError> for ApiError {
    fn from(e: TriageError) -> Self {
        match &e {
            TriageError::InvalidWeights { field, message } => {
                ApiError::field(field, message.clone())
            }
            TriageError::WrongTask(_) | TriageError::Page(_) => {
                ApiError::bad_request(e.to_string())
            }
            TriageError::Pipeline(_) => ApiError {
                status: StatusCode::INTERNAL_SERVER_ERROR,
                message: e.to_string(),
                field: None,
            },
        }
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let Some(f) = self.field {
            body["field"] = Value::String(f);
        }
        (self.status, Json(body)).into_response()
    }
}

/// Picks a job: by id, or the first finished job matching the filters.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct Selector {
    pub run: Option<String>,
    pub job: Option<String>,
    pub region: Option<String>,
    pub task: Option<Task>,
    pub model: Option<String>,
    pub feature_set: Option<FeatureSet>,
}

impl Selector {
    fn resolve<'a>(
        &self,
        state: &'a AppState,
        default_task: Option<Task>,
    ) -> Result<(&'a Run, &'a JobEntry), ApiError> {
        let run = state.run(self.run.as_deref())?;
        if let Some(id) = &self.job {
            return Ok((run, run.artifacts.job(id)?));
        }
        let region: Option<RegionId> = match &self.region {
            Some(r) => Some(
                r.parse()
                    .map_err(|e: String| ApiError::field("region", e))?,
            ),
            None => None,
        };
        let task = self.task.or(default_task);
        run.artifacts
            .manifest
            .jobs
            .iter()
            .filter(|j| j.status.is_finished())
            .find(|j| {
                region.is_none_or(|r| j.region == r)
                    && task.is_none_or(|t| j.task == t)
                    && self.model.as_ref().is_none_or(|m| &j.model == m)
                    && self.feature_set.is_none_or(|f| j.feature_set == f)
            })
            .map(|j| (run, j))
            .ok_or_else(|| ApiError::not_found("no finished job matches the selection"))
    }
}

#[derive(Debug, Deserialize)]
struct RecordsParams {
    #[serde(flatten)]
    selector: Selector,
    page: Option<usize>,
    page_size: Option<usize>,
    faded: Option<bool>,
    eligible: Option<bool>,
}

#[derive(Serialize)]
struct RecordsResponse<'a> {
    run: &'a str,
    job: &'a str,
    formula_version: &'static str,
    #[serde(flatten)]
    page: povtriage::triage::RecordPage,
}

#[derive(Serialize)]
struct RankResponse<'a> {
    run: &'a str,
    job: &'a str,
    #[serde(flatten)]
    ranking: povtriage::triage::Ranking,
}

type AppResult = Result<Response, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(health))
        .route("/api/runs", get(runs))
        .route("/api/records", get(records))
        .route("/api/rank", post(rank_records))
        .route("/api/curves", get(curves))
        .route("/api/importances", get(importances))
        .layer(
            CorsLayer::new()
                .allow_origin(Any)
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE]),
        )
        .with_state(state)
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "formula_version": FORMULA_VERSION,
        "runs": state.runs.keys().collect::<Vec<_>>(),
    }))
}

async fn runs(State(state): State<Arc<AppState>>) -> Json<Value> {
    let list: Vec<Value> = state
        .runs
        .values()
        .map(|r| {
            json!({
                "run": r.id,
                "summary": r.artifacts.manifest.summary(),
                "jobs": r.artifacts.manifest.jobs.iter().map(|j| json!({
                    "id": j.id,
                    "region": j.region,
                    "task": j.task,
                    "model": j.model,
                    "feature_set": j.feature_set,
                    "state": j.status.name(),
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    Json(json!({ "runs": list }))
}

/// Triage records are scored off the async runtime.
async fn job_records(
    state: Arc<AppState>,
    sel: Selector,
) -> Result<(String, String, Arc<Vec<TriageRecord>>), ApiError> {
    tokio::task::spawn_blocking(move || {
        let (run, job) = sel.resolve(&state, Some(Task::Underreporting))?;
        Ok((run.id.clone(), job.id.clone(), run.records(&job.id)?))
    })
    .await
    .map_err(|e| ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        message: e.to_string(),
        field: None,
    })?
}

async fn records(
    State(state): State<Arc<AppState>>,
    q: Result<Query<RecordsParams>, QueryRejection>,
) -> AppResult {
    let Query(q) = q?;
    let query = RecordQuery {
        page: q.page.unwrap_or(0),
        page_size: q.page_size.unwrap_or(RecordQuery::default().page_size),
        faded: q.faded,
        eligible: q.eligible,
    };
    let (run, job, recs) = job_records(state, q.selector).await?;
    let page = page_records(&recs, &query)?;
    Ok(Json(RecordsResponse {
        run: &run,
        job: &job,
        formula_version: FORMULA_VERSION,
        page,
    })
    .into_response())
}

/// Weights with a message naming the offending field.
fn parse_weights(v: &Value) -> Result<TriageWeights, ApiError> {
    let obj = v
        .as_object()
        .ok_or_else(|| ApiError::field("weights", "must be an object"))?;
    for key in obj.keys() {
        if !["w_prob", "w_discrepancy", "w_proximity", "tau"].contains(&key.as_str()) {
            return Err(ApiError::field(key, "unknown weight"));
        }
    }
    let num = |key: &str| -> Result<Option<f64>, ApiError> {
        match obj.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| ApiError::field(key, format!("must be a number, got {v}"))),
        }
    };
    let req = |key: &str| num(key)?.ok_or_else(|| ApiError::field(key, "is required"));
    let w = TriageWeights {
        w_prob: req("w_prob")?,
        w_discrepancy: req("w_discrepancy")?,
        w_proximity: req("w_proximity")?,
        tau: num("tau")?,
    };
    w.validate()?;
    Ok(w)
}

async fn rank_records(State(state): State<Arc<AppState>>, body: Bytes) -> AppResult {
    let mut v: Value = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("body is not valid JSON: {e}")))?;
    let obj = v
        .as_object_mut()
        .ok_or_else(|| ApiError::bad_request("body must be a JSON object"))?;
    let weights = parse_weights(
        &obj.remove("weights")
            .ok_or_else(|| ApiError::field("weights", "is required"))?,
    )?;
    let ids: Option<Vec<HouseholdId>> = match obj.remove("household_ids") {
        None | Some(Value::Null) => None,
        Some(v) => Some(serde_json::from_value(v).map_err(|e| {
            ApiError::field("household_ids", format!("must be a list of ids: {e}"))
        })?),
    };
    let sel: Selector =
        serde_json::from_value(v).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let (run, job, recs) = job_records(state, sel).await?;
    let mut ranking = rank(&recs, &weights)?;
    // Restrict after ranking so scaling is over every record of the job.
    if let Some(ids) = ids {
        let keep: std::collections::HashSet<_> = ids.into_iter().collect();
        ranking
            .records
            .retain(|r| keep.contains(&r.record.household_id));
    }
    Ok(Json(RankResponse {
        run: &run,
        job: &job,
        ranking,
    })
    .into_response())
}

async fn curves(
    State(state): State<Arc<AppState>>,
    q: Result<Query<Selector>, QueryRejection>,
) -> AppResult {
    let Query(sel) = q?;
    let (run, job) = sel.resolve(&state, None)?;
    let cv = run.artifacts.cv_result(&job.id)?;
    Ok(Json(json!({ "run": run.id, "job": job.id, "result": cv })).into_response())
}

async fn importances(
    State(state): State<Arc<AppState>>,
    q: Result<Query<Selector>, QueryRejection>,
) -> AppResult {
    let Query(sel) = q?;
    let (run, job) = sel.resolve(&state, None)?;
    let list: Vec<Value> = run
        .artifacts
        .importances(&job.id)?
        .into_iter()
        .map(|(f, v)| json!({ "feature": f, "importance": v }))
        .collect();
    Ok(Json(json!({ "run": run.id, "job": job.id, "importances": list })).into_response())
}

/// Serve until interrupted.
pub async fn serve(state: AppState, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
