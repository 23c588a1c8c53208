//! HTTP API over a lessonforge store: runs, lessons, ratings, agreement,
//! consensus and aggregate reports.
//!
//! Generation runs execute on the blocking pool; clients poll
//! `GET /runs/{id}` for status.

mod canon;
mod error;

use std::collections::{BTreeMap, HashSet};
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use lessonforge_core::corpus::Retriever;
use lessonforge_core::evaluation::{
    aggregate_by_strategy, coder_pairs, consensus_counts_by_code, kappa_summary, resolve_consensus,
    scores_from_consensus, AggregateReport, ConsensusError, KappaError, RatingError, RatingSession, RatingValues,
    Rubric, Tiebreaks,
};
use lessonforge_core::lesson::Lesson;
use lessonforge_core::pipeline::backend::ModelBackend;
use lessonforge_core::pipeline::{make_plan, GenerationRun, ModelConfig, Pipeline, PromptTemplates, RunStatus};
use lessonforge_core::store::{RunLock, RunRecord, Store};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use canon::Canonical;
pub use error::{codes, ApiError};

type ApiResult<T> = Result<T, ApiError>;

/// Everything the handlers share.
pub struct AppState {
    pub store: Store,
    pub backend: Arc<dyn ModelBackend>,
    pub retriever: Arc<dyn Retriever>,
    pub templates: Arc<PromptTemplates>,
    pub rubric: Arc<Rubric>,
    pub default_config: ModelConfig,
    in_flight: Mutex<HashSet<String>>,
}

impl AppState {
    pub fn new(
        store: Store,
        backend: Arc<dyn ModelBackend>,
        retriever: Arc<dyn Retriever>,
        templates: PromptTemplates,
        rubric: Rubric,
        default_config: ModelConfig,
    ) -> AppState {
        AppState {
            store,
            backend,
            retriever,
            templates: Arc::new(templates),
            rubric: Arc::new(rubric),
            default_config,
            in_flight: Mutex::new(HashSet::new()),
        }
    }

    pub fn is_in_flight(&self, run_id: &str) -> bool {
        self.in_flight.lock().unwrap_or_else(|e| e.into_inner()).contains(run_id)
    }

    fn claim(self: &Arc<Self>, run_id: &str) -> Option<InFlight> {
        let mut set = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        set.insert(run_id.to_owned()).then(|| InFlight { state: Arc::clone(self), run_id: run_id.to_owned() })
    }
}

/// Marks a run as executing; cleared on drop.
struct InFlight {
    state: Arc<AppState>,
    run_id: String,
}

impl Drop for InFlight {
    fn drop(&mut self) {
        self.state.in_flight.lock().unwrap_or_else(|e| e.into_inner()).remove(&self.run_id);
    }
}

#[derive(Debug, Clone, Default)]
pub struct ServerOptions {
    /// Allowed CORS origin for the workbench; any origin when absent.
    pub cors_origin: Option<String>,
}

pub fn router(state: Arc<AppState>, options: &ServerOptions) -> Router {
    let cors = match options.cors_origin.as_deref().and_then(|o| HeaderValue::from_str(o).ok()) {
        Some(origin) => CorsLayer::new().allow_origin(AllowOrigin::exact(origin)),
        None => CorsLayer::new().allow_origin(Any),
    }
    .allow_methods(Any)
    .allow_headers(Any);

    Router::new()
        .route("/runs", post(create_run).get(list_runs))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/transcripts", get(get_transcripts))
        .route("/runs/{id}/segments/{g}/regenerate", post(regenerate))
        .route("/lessons", get(list_lessons))
        .route("/lessons/{id}", get(get_lesson))
        .route("/rubric", get(get_rubric))
        .route("/ratings", post(post_rating))
        .route("/ratings/{lesson}", get(get_ratings))
        .route("/kappa", get(get_kappa))
        .route("/consensus/{lesson}", post(post_consensus).get(get_consensus))
        .route("/reports/aggregate", get(get_aggregate))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .layer(cors)
        .with_state(state)
}

pub async fn serve(state: Arc<AppState>, addr: SocketAddr, options: ServerOptions) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state, &options)).await
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    payload.map(|Json(v)| v).map_err(|e| ApiError::bad_request(e.body_text()))
}

// ---- runs

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRun {
    topic: String,
    k: i64,
    #[serde(default)]
    config: Option<ModelConfig>,
}

#[derive(Debug, Serialize)]
struct RunView {
    #[serde(flatten)]
    record: RunRecord,
    lesson: Option<Lesson>,
    in_flight: bool,
}

/// Runs the pipeline step on the blocking pool and persists the result,
/// turning a panic into a failed run.
fn execute<F>(state: Arc<AppState>, lock: RunLock, guard: InFlight, mut run: GenerationRun, step: F)
where
    F: FnOnce(&Pipeline<'_>, &mut GenerationRun) + Send + 'static,
{
    tokio::task::spawn_blocking(move || {
        let _guard = guard;
        let pipeline = Pipeline::new(state.backend.as_ref(), state.retriever.as_ref(), &state.templates);
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| step(&pipeline, &mut run)));
        if outcome.is_err() {
            run.status = RunStatus::Failed { reason: "internal error while generating".into() };
        }
        if let Err(e) = state.store.save_run(&lock, &run) {
            tracing::error!(run = %run.id, error = %e, "could not persist run");
        }
    });
}

async fn create_run(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<CreateRun>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let req = body(payload)?;
    if req.topic.trim().is_empty() {
        return Err(ApiError::bad_request("topic is empty"));
    }
    let plan = make_plan(req.k).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let config = req.config.unwrap_or_else(|| state.default_config.clone());
    config.check().map_err(ApiError::bad_request)?;

    let id = state.store.new_run_id();
    let guard = state.claim(&id).ok_or_else(|| ApiError::new(StatusCode::CONFLICT, codes::RUN_IN_FLIGHT, "run id collision"))?;
    let lock = state.store.lock_run(&id)?;
    let pending = GenerationRun::new(&id, req.topic.trim(), plan.clone(), config.clone());
    state.store.save_run(&lock, &pending)?;

    let (topic, id2) = (pending.topic.clone(), id.clone());
    execute(Arc::clone(&state), lock, guard, pending, move |p, run| {
        *run = p.run(&id2, &topic, plan, config);
    });
    Ok((StatusCode::ACCEPTED, Canonical(json!({ "id": id, "status": RunStatus::Pending }))))
}

async fn list_runs(State(state): State<Arc<AppState>>) -> ApiResult<impl IntoResponse> {
    Ok(Canonical(state.store.list_runs()?))
}

async fn get_run(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let run = state.store.load_run(&id)?;
    let record = state.store.load_run_record(&id)?;
    Ok(Canonical(RunView { record, lesson: run.lesson, in_flight: state.is_in_flight(&id) }))
}

async fn get_transcripts(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Canonical(state.store.load_run(&id)?.transcripts))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegenerateRequest {
    #[serde(default)]
    note: String,
}

async fn regenerate(
    State(state): State<Arc<AppState>>,
    Path((id, g)): Path<(String, usize)>,
    payload: Result<Json<RegenerateRequest>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let req = body(payload)?;
    let run = state.store.load_run(&id)?;
    let in_flight = || ApiError::new(StatusCode::CONFLICT, codes::RUN_IN_FLIGHT, format!("run {id} is still executing"));
    let guard = state.claim(&id).ok_or_else(in_flight)?;
    let lock = state.store.lock_run(&id).map_err(|_| in_flight())?;
    // Re-read under the lock in case a writer finished in between.
    let run = state.store.load_run(&run.id)?;
    if g >= run.plan.groups.len() {
        return Err(ApiError::unprocessable(
            codes::REGENERATE_REJECTED,
            format!("segment {g} out of range for a {}-group plan", run.plan.groups.len()),
        ));
    }
    if run.transcripts.len() < g || run.transcripts[..g].iter().any(|t| t.sections.is_empty()) {
        return Err(ApiError::unprocessable(
            codes::REGENERATE_REJECTED,
            format!("segments before {g} have not been generated"),
        ));
    }
    let mut pending = run.clone();
    pending.status = RunStatus::Pending;
    state.store.save_run(&lock, &pending)?;

    let note = req.note;
    execute(Arc::clone(&state), lock, guard, run, move |p, run| {
        if let Err(reason) = p.regenerate(run, g, &note) {
            run.status = RunStatus::Failed { reason };
        }
    });
    Ok((StatusCode::ACCEPTED, Canonical(json!({ "id": id, "segment": g, "status": RunStatus::Pending }))))
}

// ---- lessons and rubric

async fn list_lessons(State(state): State<Arc<AppState>>) -> ApiResult<impl IntoResponse> {
    Ok(Canonical(state.store.list_lessons()?))
}

async fn get_lesson(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let (summary, lesson) = state.store.find_lesson(&id)?;
    Ok(Canonical(json!({ "summary": summary, "lesson": lesson })))
}

async fn get_rubric(State(state): State<Arc<AppState>>) -> impl IntoResponse {
    Canonical(state.rubric.as_ref().clone())
}

// ---- ratings

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RatingPayload {
    coder: String,
    lesson: String,
    values: RatingValues,
}

async fn post_rating(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<RatingPayload>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let req = body(payload)?;
    let mut session = RatingSession::new(req.coder, req.lesson, req.values);
    session.require_complete(&state.rubric).map_err(|e| match &e {
        RatingError::MissingCodes { missing, .. } => ApiError::unprocessable(codes::INCOMPLETE_RATING, e.to_string())
            .with_details(json!({ "missing": missing })),
        RatingError::UnknownCodes { unknown, .. } => {
            ApiError::unprocessable(codes::UNKNOWN_CODES, e.to_string()).with_details(json!({ "unknown": unknown }))
        }
        _ => ApiError::bad_request(e.to_string()),
    })?;
    state.store.save_rating(&session)?;
    Ok((StatusCode::CREATED, Canonical(session)))
}

async fn get_ratings(State(state): State<Arc<AppState>>, Path(lesson): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Canonical(state.store.load_ratings(&lesson)?))
}

#[derive(Debug, Deserialize)]
struct KappaQuery {
    lesson: Option<String>,
    #[serde(default)]
    pooled: bool,
}

async fn get_kappa(
    State(state): State<Arc<AppState>>,
    query: Result<Query<KappaQuery>, QueryRejection>,
) -> ApiResult<impl IntoResponse> {
    let Query(q) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let sessions = match (&q.lesson, q.pooled) {
        (Some(_), true) => return Err(ApiError::bad_request("give either lesson or pooled=true, not both")),
        (None, false) => return Err(ApiError::bad_request("give lesson=<id> or pooled=true")),
        (Some(l), false) => state.store.load_ratings(l)?,
        (None, true) => state.store.all_ratings()?,
    };
    let sessions: Vec<RatingSession> = sessions
        .into_iter()
        .map(|mut s| {
            let _ = s.refresh(&state.rubric);
            s
        })
        .collect();
    let summary = kappa_summary(&sessions, q.lesson.as_deref()).map_err(|e| match e {
        KappaError::Empty | KappaError::CoderCount { .. } | KappaError::DegenerateMarginals | KappaError::ItemSetMismatch { .. } => {
            ApiError::unprocessable(codes::KAPPA_UNAVAILABLE, e.to_string())
        }
    })?;
    Ok(Canonical(summary))
}

// ---- consensus

async fn post_consensus(
    State(state): State<Arc<AppState>>,
    Path(lesson): Path<String>,
    payload: Result<Json<Tiebreaks>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let tiebreaks = body(payload)?;
    let mut sessions = state.store.load_ratings(&lesson)?;
    for s in &mut sessions {
        let _ = s.refresh(&state.rubric);
    }
    let pairs = coder_pairs(&sessions, Some(&lesson))
        .map_err(|e| ApiError::unprocessable(codes::CONSENSUS_REJECTED, e.to_string()))?;
    let (a, b) = pairs[0];
    let record = resolve_consensus(&state.rubric, a, b, &tiebreaks).map_err(|e| {
        let details = match &e {
            ConsensusError::MissingTiebreaks(ids) => json!({ "missing": ids }),
            ConsensusError::SuperfluousTiebreaks(ids) => json!({ "superfluous": ids }),
            _ => json!({}),
        };
        ApiError::unprocessable(codes::CONSENSUS_REJECTED, e.to_string()).with_details(details)
    })?;
    state.store.save_consensus(&record)?;
    Ok((StatusCode::CREATED, Canonical(record)))
}

async fn get_consensus(State(state): State<Arc<AppState>>, Path(lesson): Path<String>) -> ApiResult<impl IntoResponse> {
    state
        .store
        .load_consensus(&lesson)?
        .map(Canonical)
        .ok_or_else(|| ApiError::not_found(format!("no consensus for lesson {lesson}")))
}

// ---- reports

#[derive(Debug, Serialize)]
struct AggregateView {
    report: AggregateReport,
    text: String,
    /// Consensus records whose lesson is not produced by a stored run.
    skipped: Vec<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    problems: BTreeMap<&'static str, String>,
}

async fn get_aggregate(State(state): State<Arc<AppState>>) -> ApiResult<impl IntoResponse> {
    let (entries, skipped) = state.store.consensus_entries()?;
    let mut problems = BTreeMap::new();
    let mut report = AggregateReport { scores: None, code_counts: None };
    if !entries.is_empty() {
        match scores_from_consensus(&state.rubric, &entries)
            .and_then(|s| aggregate_by_strategy(&s, state.rubric.len() as u32))
        {
            Ok(t) => report.scores = Some(t),
            Err(e) => {
                problems.insert("scores", e.to_string());
            }
        }
        match consensus_counts_by_code(&state.rubric, &entries) {
            Ok(t) => report.code_counts = Some(t),
            Err(e) => {
                problems.insert("code_counts", e.to_string());
            }
        }
    }
    let text = report.render_text();
    Ok(Canonical(AggregateView { report, text, skipped, problems }))
}
