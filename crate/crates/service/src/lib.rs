//! HTTP+JSON service: message scoring against a loaded ensemble and
//! active-labeling sessions.
//!
//! | method | path | body / response |
//! |---|---|---|
//! | POST | `/v1/score` | `{"texts": [..]}` → `{"results": [{"score", "verdict"}]}` |
//! | GET | `/v1/health` | `{"model_loaded": bool, "sessions_persisted": bool}` |
//! | POST | `/v1/sessions` | `{"session_id"?, "messages"?, "schedule"?, "seed"?}` → status (201) |
//! | GET | `/v1/sessions/{id}` | status |
//! | GET | `/v1/sessions/{id}/pending` | `{"status", "messages": [{"id", "text", "score"}]}` |
//! | POST | `/v1/sessions/{id}/labels` | `{"labels": [{"id", "label": 0 or 1}]}` → outcome |
//! | GET | `/v1/sessions/{id}/export` | labeled set as JSON lines |
//! | GET | `/v1/sessions/{id}/events` | event log as JSON lines |
//!
//! Errors are `{"error": message, "ids"?: [..]}` with 400 for malformed
//! bodies, 404 for unknown sessions, 409 for ids that are not pending (listed
//! in `ids`) and 503 when scoring without a model.

mod error;
mod store;

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use urgency::active::{LabelEntry, PendingMessage, Schedule, SessionConfig, SessionStatus, SubmitOutcome};
use urgency::model::EnsembleModel;
use urgency::preprocess::{Label, Message};

pub use error::ApiError;
pub use store::{NewSession, SessionDefaults, SessionStore};

pub struct AppState {
    pub model: Option<Arc<EnsembleModel>>,
    pub sessions: SessionStore,
    persisted: bool,
}

impl AppState {
    pub fn new(model: Option<EnsembleModel>, sessions: SessionStore, persisted: bool) -> Self {
        AppState {
            model: model.map(Arc::new),
            sessions,
            persisted,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Urgent,
    NonUrgent,
}

impl From<Label> for Verdict {
    fn from(l: Label) -> Self {
        match l {
            Label::Urgent => Verdict::Urgent,
            Label::NonUrgent => Verdict::NonUrgent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResult {
    pub score: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub results: Vec<ScoreResult>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    pub session_id: Option<String>,
    pub messages: Option<Vec<Message>>,
    pub schedule: Option<Schedule>,
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelsRequest {
    pub labels: Vec<LabelEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PendingResponse {
    pub status: SessionStatus,
    pub messages: Vec<PendingMessage>,
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::BadRequest(e.body_text()))
}

fn json_lines<T: Serialize>(items: &[T]) -> Result<impl IntoResponse, ApiError> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).map_err(|e| ApiError::Internal(e.to_string()))?;
        out.push(b'\n');
    }
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], out))
}

/// Scores each text in request order.
pub fn score_texts(model: &EnsembleModel, texts: &[String]) -> Vec<ScoreResult> {
    texts
        .iter()
        .enumerate()
        .map(|(i, text)| {
            let score = model.score(&Message::new(i.to_string(), text.clone()));
            ScoreResult {
                score,
                verdict: model.verdict(score).into(),
            }
        })
        .collect()
}

async fn score(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<ScoreRequest>, JsonRejection>,
) -> Result<Json<ScoreResponse>, ApiError> {
    let req = body(payload)?;
    let model = state
        .model
        .clone()
        .ok_or_else(|| ApiError::Unavailable("no model is loaded".into()))?;
    let results = tokio::task::spawn_blocking(move || score_texts(&model, &req.texts))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(Json(ScoreResponse { results }))
}

async fn health(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(serde_json::json!({
        "model_loaded": state.model.is_some(),
        "sessions_persisted": state.persisted,
    }))
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<CreateSessionRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionStatus>), ApiError> {
    let req = body(payload)?;
    let defaults = &state.sessions.defaults().config;
    let config = SessionConfig {
        schedule: req.schedule.unwrap_or(defaults.schedule),
        seed: req.seed.unwrap_or(defaults.seed),
        fit: defaults.fit.clone(),
    };
    let status = state
        .sessions
        .create(NewSession {
            session_id: req.session_id,
            messages: req.messages,
            config,
        })
        .await?;
    Ok((StatusCode::CREATED, Json(status)))
}

async fn session_status(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<SessionStatus>, ApiError> {
    state.sessions.status(&id).map(Json)
}

async fn pending(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<PendingResponse>, ApiError> {
    let (status, messages) = state.sessions.pending(&id).await?;
    Ok(Json(PendingResponse { status, messages }))
}

async fn submit_labels(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    payload: Result<Json<LabelsRequest>, JsonRejection>,
) -> Result<Json<SubmitOutcome>, ApiError> {
    let req = body(payload)?;
    let labels = req.labels.into_iter().map(|e| (e.id, e.label)).collect();
    state.sessions.submit(&id, labels).await.map(Json)
}

async fn export(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    json_lines(&state.sessions.export(&id).await?)
}

async fn events(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    json_lines(&state.sessions.events(&id).await?)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/score", post(score))
        .route("/v1/health", get(health))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(session_status))
        .route("/v1/sessions/{id}/pending", get(pending))
        .route("/v1/sessions/{id}/labels", post(submit_labels))
        .route("/v1/sessions/{id}/export", get(export))
        .route("/v1/sessions/{id}/events", get(events))
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    tracing::info!(addr = ?listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).await
}
