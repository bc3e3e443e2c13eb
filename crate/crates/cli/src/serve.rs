//! JSON API over a dataset's repair queue, used by the browser editor.
//!
//! | route                        | effect                                           |
//! |------------------------------|--------------------------------------------------|
//! | `GET /tickets`               | ticket summaries, pending first by repairability |
//! | `GET /tickets/{id}`          | one ticket with its room and report              |
//! | `PUT /tickets/{id}/grid`     | validate and novelty-check an edit, no commit    |
//! | `POST /tickets/{id}/submit`  | commit a repair                                  |
//! | `POST /tickets/{id}/discard` | drop a ticket                                    |
//! | `GET /dataset/stats`         | dataset and progress counters                    |
//! | `GET /levels/{id}`           | one stored room                                  |
//!
//! Every mutation goes through the one [`Pipeline`] behind a mutex.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use roomforge::backend::ModelRef;
use roomforge::constraints::{ConstraintId, PlayabilityReport};
use roomforge::dataset::Provenance;
use roomforge::level::{parse_level, Grid};
use roomforge::metrics::NoveltyResult;
use roomforge::pipeline::{Pipeline, PipelineError, RepairTicket, TicketStatus};
use roomforge::prompting::PromptSpec;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

pub type Shared = Arc<Mutex<Pipeline>>;

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> ApiError {
        let status = match e {
            PipelineError::UnknownTicket(_) => StatusCode::NOT_FOUND,
            PipelineError::TicketClosed { .. } => StatusCode::CONFLICT,
            PipelineError::SizeMismatch { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn lock(state: &Shared) -> MutexGuard<'_, Pipeline> {
    state.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TicketSummary {
    pub ticket_id: String,
    pub status: TicketStatus,
    pub repairability: usize,
    pub failed: Vec<ConstraintId>,
    pub width: usize,
    pub height: usize,
}

impl From<&RepairTicket> for TicketSummary {
    fn from(t: &RepairTicket) -> TicketSummary {
        TicketSummary {
            ticket_id: t.ticket_id.clone(),
            status: t.status,
            repairability: t.report.repairability,
            failed: t.report.failed().collect(),
            width: t.original_grid.width(),
            height: t.original_grid.height(),
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct TicketFilter {
    pub status: Option<TicketStatus>,
}

/// Body of the edit and submit routes.
#[derive(Debug, Serialize, Deserialize)]
pub struct GridBody {
    pub grid: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Preview {
    pub report: PlayabilityReport,
    pub novelty: NoveltyResult,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Stats {
    pub entries: usize,
    pub by_provenance: BTreeMap<String, usize>,
    pub pending_tickets: usize,
    pub stage1_accepted: usize,
    pub stage1_target_new: usize,
    pub stage2_rounds: u32,
    pub model: Option<ModelRef>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Level {
    pub id: String,
    pub grid: Grid,
    pub spec: PromptSpec,
    pub provenance: Provenance,
    pub round_added: u32,
}

fn parse_body(body: &GridBody) -> Result<Grid, ApiError> {
    parse_level(&body.grid).map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))
}

async fn list_tickets(State(state): State<Shared>, Query(filter): Query<TicketFilter>) -> Json<Vec<TicketSummary>> {
    let pipeline = lock(&state);
    let mut tickets: Vec<TicketSummary> = pipeline
        .tickets()
        .iter()
        .filter(|t| filter.status.is_none_or(|s| t.status == s))
        .map(TicketSummary::from)
        .collect();
    tickets.sort_by_key(|t| (t.status != TicketStatus::Pending, t.repairability));
    Json(tickets)
}

async fn get_ticket(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<RepairTicket> {
    let pipeline = lock(&state);
    let ticket = pipeline.ticket(&id).ok_or(PipelineError::UnknownTicket(id))?;
    Ok(Json(ticket.clone()))
}

async fn preview(State(state): State<Shared>, Path(id): Path<String>, Json(body): Json<GridBody>) -> ApiResult<Preview> {
    let grid = parse_body(&body)?;
    let (report, novelty) = lock(&state).preview_repair(&id, &grid)?;
    Ok(Json(Preview { report, novelty }))
}

async fn submit(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Json(body): Json<GridBody>,
) -> ApiResult<roomforge::pipeline::SubmitOutcome> {
    let grid = parse_body(&body)?;
    let mut pipeline = lock(&state);
    pipeline.preview_repair(&id, &grid)?;
    Ok(Json(pipeline.submit_repair(&id, grid)?))
}

async fn discard(State(state): State<Shared>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    lock(&state).discard(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

fn provenance_kind(p: &Provenance) -> &'static str {
    match p {
        Provenance::Handmade => "handmade",
        Provenance::Repaired => "repaired",
        Provenance::Generated => "generated",
        Provenance::Augmented { .. } => "augmented",
    }
}

pub fn stats(pipeline: &Pipeline) -> Stats {
    let mut by_provenance = BTreeMap::new();
    for e in pipeline.dataset().entries() {
        *by_provenance.entry(provenance_kind(&e.provenance).to_string()).or_insert(0) += 1;
    }
    Stats {
        entries: pipeline.dataset().len(),
        by_provenance,
        pending_tickets: pipeline.pending_tickets().count(),
        stage1_accepted: pipeline.state().stage1_accepted,
        stage1_target_new: pipeline.config().stage1_target_new,
        stage2_rounds: pipeline.state().stage2_rounds,
        model: pipeline.state().model.clone(),
    }
}

async fn dataset_stats(State(state): State<Shared>) -> Json<Stats> {
    Json(stats(&lock(&state)))
}

async fn get_level(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Level> {
    let pipeline = lock(&state);
    let entry = pipeline
        .dataset()
        .get(&id)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no such level {id}")))?;
    Ok(Json(Level {
        id: entry.id.clone(),
        grid: entry.grid.clone(),
        spec: entry.spec.clone(),
        provenance: entry.provenance.clone(),
        round_added: entry.round_added,
    }))
}

/// The API router, with `static_dir` served for every other path when given.
pub fn router(state: Shared, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/tickets", get(list_tickets))
        .route("/tickets/{id}", get(get_ticket))
        .route("/tickets/{id}/grid", put(preview))
        .route("/tickets/{id}/submit", post(submit))
        .route("/tickets/{id}/discard", post(discard))
        .route("/dataset/stats", get(dataset_stats))
        .route("/levels/{id}", get(get_level))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}
