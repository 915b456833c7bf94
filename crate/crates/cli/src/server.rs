//! Local JSON API over a workspace.
//!
//! Runs are accepted immediately and executed on a bounded worker pool.
//! Each run moves `queued -> running -> done | failed` and never backwards;
//! a second request for a run id already queued or running joins the
//! existing job instead of starting another writer.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use genoshare::pipeline::{
    tradeoff_curve, DecisionRequest, PipelineError, RunConfig, RunReport, TradeoffCurve, Workspace,
};
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use crate::{parse_epsilons, RunParams};

/// Uploads are whole genotype matrices; the eye-colour cohort alone is
/// about 25 MB of TSV.
const MAX_UPLOAD_BYTES: usize = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunState {
    pub id: String,
    pub status: RunStatus,
    /// Every status the run has been in, oldest first.
    pub history: Vec<RunStatus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<RunReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunState {
    fn done(id: String, report: RunReport) -> Self {
        Self { id, status: RunStatus::Done, history: vec![RunStatus::Done], report: Some(report), error: None }
    }

    fn advance(&mut self, status: RunStatus) {
        self.status = status;
        self.history.push(status);
    }
}

/// `{"dataset": name, ...RunParams}`. Unknown keys are rejected.
#[derive(Debug, Deserialize)]
#[serde(try_from = "serde_json::Map<String, serde_json::Value>")]
pub struct RunRequest {
    pub dataset: String,
    pub params: RunParams,
}

impl TryFrom<serde_json::Map<String, serde_json::Value>> for RunRequest {
    type Error = String;

    fn try_from(mut map: serde_json::Map<String, serde_json::Value>) -> Result<Self, String> {
        let dataset = match map.remove("dataset") {
            Some(serde_json::Value::String(name)) => name,
            _ => return Err("missing string field `dataset`".into()),
        };
        let params = serde_json::from_value(serde_json::Value::Object(map)).map_err(|e| e.to_string())?;
        Ok(Self { dataset, params })
    }
}

#[derive(Clone)]
pub struct AppState {
    workspace: Workspace,
    workers: Arc<Semaphore>,
    jobs: Arc<Mutex<HashMap<String, RunState>>>,
}

impl AppState {
    /// `workers` bounds how many pipeline runs execute at once.
    pub fn new(workspace: Workspace, workers: usize) -> Self {
        Self {
            workspace,
            workers: Arc::new(Semaphore::new(workers.max(1))),
            jobs: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    fn set_status(&self, id: &str, status: RunStatus, report: Option<RunReport>, error: Option<String>) {
        let mut jobs = self.jobs.lock().expect("job table poisoned");
        if let Some(job) = jobs.get_mut(id) {
            job.advance(status);
            job.report = report;
            job.error = error;
        }
    }
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let status = match e {
            PipelineError::Config(_) => StatusCode::BAD_REQUEST,
            PipelineError::NotFound(_) => StatusCode::NOT_FOUND,
            PipelineError::Conflict(_) => StatusCode::CONFLICT,
            PipelineError::Stage { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            PipelineError::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

fn bad_request(message: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, message.into())
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/datasets", get(list_datasets).post(upload_dataset))
        .route("/api/runs", get(list_runs).post(submit_run))
        .route("/api/runs/{id}", get(get_run))
        .route("/api/tradeoff", get(get_tradeoff))
        .route("/api/decisions", get(list_decisions).post(record_decision))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

/// Binds `addr` and serves until ctrl-c. Binding errors (such as the port
/// being taken) are returned before anything is served.
pub async fn serve(state: AppState, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    println!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, PipelineError> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

async fn list_datasets(State(state): State<AppState>) -> ApiResult<impl IntoResponse> {
    let ws = state.workspace.clone();
    Ok(Json(blocking(move || ws.list_datasets()).await?))
}

/// Multipart fields: `name` (text), `genotypes` and `panel` (TSV files).
async fn upload_dataset(State(state): State<AppState>, mut form: Multipart) -> ApiResult<impl IntoResponse> {
    let (mut name, mut genotypes, mut panel) = (None, None, None);
    while let Some(field) = form.next_field().await.map_err(|e| bad_request(e.to_string()))? {
        let key = field.name().unwrap_or_default().to_owned();
        let text = field.text().await.map_err(|e| bad_request(e.to_string()))?;
        match key.as_str() {
            "name" => name = Some(text),
            "genotypes" => genotypes = Some(text),
            "panel" => panel = Some(text),
            other => return Err(bad_request(format!("unexpected field {other:?}"))),
        }
    }
    let (Some(name), Some(genotypes), Some(panel)) = (name, genotypes, panel) else {
        return Err(bad_request("expected fields name, genotypes and panel"));
    };
    let ws = state.workspace.clone();
    let info = blocking(move || ws.add_dataset(name.trim(), &genotypes, &panel)).await?;
    Ok((StatusCode::CREATED, Json(info)))
}

async fn submit_run(State(state): State<AppState>, Json(request): Json<RunRequest>) -> ApiResult<Response> {
    let ws = state.workspace.clone();
    let (cfg, id) = blocking(move || {
        let cfg = request.params.config(&ws, &request.dataset)?;
        cfg.validate()?;
        let id = run_id(&cfg)?;
        Ok((cfg, id))
    })
    .await?;

    {
        let mut jobs = state.jobs.lock().expect("job table poisoned");
        if let Some(job) = jobs.get(&id) {
            // failed runs are retried; anything else is joined
            if job.status != RunStatus::Failed {
                let code = if job.status == RunStatus::Done { StatusCode::OK } else { StatusCode::ACCEPTED };
                return Ok((code, Json(job.clone())).into_response());
            }
        }
        if let Some(report) = state.workspace.load_report(&id)? {
            let job = RunState::done(id.clone(), report);
            jobs.insert(id, job.clone());
            return Ok((StatusCode::OK, Json(job)).into_response());
        }
        let job = RunState {
            id: id.clone(),
            status: RunStatus::Queued,
            history: vec![RunStatus::Queued],
            report: None,
            error: None,
        };
        jobs.insert(id.clone(), job);
    }

    let worker_state = state.clone();
    let job_id = id.clone();
    tokio::spawn(async move {
        let Ok(_permit) = worker_state.workers.clone().acquire_owned().await else {
            return;
        };
        worker_state.set_status(&job_id, RunStatus::Running, None, None);
        let ws = worker_state.workspace.clone();
        match blocking(move || ws.run(&cfg)).await {
            Ok(report) => worker_state.set_status(&job_id, RunStatus::Done, Some(report), None),
            Err(ApiError(_, message)) => worker_state.set_status(&job_id, RunStatus::Failed, None, Some(message)),
        }
    });

    let job = state.jobs.lock().expect("job table poisoned").get(&id).cloned();
    Ok((StatusCode::ACCEPTED, Json(job)).into_response())
}

fn run_id(cfg: &RunConfig) -> Result<String, PipelineError> {
    let read = |p: &std::path::Path| {
        std::fs::read(p).map_err(|source| PipelineError::Io { path: p.to_owned(), source })
    };
    Ok(cfg.run_id(&read(&cfg.dataset)?, &read(&cfg.panel)?))
}

async fn get_run(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<RunState>> {
    if let Some(job) = state.jobs.lock().expect("job table poisoned").get(&id) {
        return Ok(Json(job.clone()));
    }
    let ws = state.workspace.clone();
    let lookup = id.clone();
    match blocking(move || ws.load_report(&lookup)).await? {
        Some(report) => Ok(Json(RunState::done(id, report))),
        None => Err(ApiError(StatusCode::NOT_FOUND, format!("not found: run {id}"))),
    }
}

#[derive(Debug, Serialize)]
struct RunSummary {
    id: String,
    status: RunStatus,
}

async fn list_runs(State(state): State<AppState>) -> ApiResult<impl IntoResponse> {
    let ws = state.workspace.clone();
    let stored = blocking(move || ws.list_runs()).await?;
    let mut runs: HashMap<String, RunStatus> =
        stored.into_iter().map(|id| (id, RunStatus::Done)).collect();
    for job in state.jobs.lock().expect("job table poisoned").values() {
        runs.insert(job.id.clone(), job.status);
    }
    let mut list: Vec<RunSummary> = runs.into_iter().map(|(id, status)| RunSummary { id, status }).collect();
    list.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(Json(list))
}

/// [`RunParams`] with a list of ε, as query parameters.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TradeoffQuery {
    dataset: String,
    epsilons: String,
    semantics: Option<genoshare::Semantics>,
    mode: Option<genoshare::NoiseMode>,
    alpha: Option<f64>,
    lambda: Option<f64>,
    seed: Option<u64>,
    attack_trials: Option<usize>,
}

async fn get_tradeoff(
    State(state): State<AppState>,
    Query(query): Query<TradeoffQuery>,
) -> ApiResult<Json<TradeoffCurve>> {
    let epsilons = parse_epsilons(&query.epsilons).map_err(bad_request)?;
    let mut params = RunParams::new(epsilons.first().copied().unwrap_or(1.0));
    let p = &query;
    params.semantics = p.semantics.unwrap_or(params.semantics);
    params.mode = p.mode.unwrap_or(params.mode);
    params.alpha = p.alpha.unwrap_or(params.alpha);
    params.lambda = p.lambda.unwrap_or(params.lambda);
    params.seed = p.seed.unwrap_or(params.seed);
    params.attack_trials = p.attack_trials.unwrap_or(params.attack_trials);

    let _permit = state
        .workers
        .clone()
        .acquire_owned()
        .await
        .map_err(|e| ApiError(StatusCode::SERVICE_UNAVAILABLE, e.to_string()))?;
    let ws = state.workspace.clone();
    let curve = blocking(move || {
        let cfg = params.config(&ws, &query.dataset)?;
        tradeoff_curve(&ws, &cfg, &epsilons)
    })
    .await?;
    Ok(Json(curve))
}

async fn record_decision(
    State(state): State<AppState>,
    Json(request): Json<DecisionRequest>,
) -> ApiResult<impl IntoResponse> {
    let ws = state.workspace.clone();
    let entry = blocking(move || ws.record_decision(&request)).await?;
    Ok((StatusCode::CREATED, Json(entry)))
}

async fn list_decisions(State(state): State<AppState>) -> ApiResult<impl IntoResponse> {
    let ws = state.workspace.clone();
    Ok(Json(blocking(move || ws.list_decisions()).await?))
}
