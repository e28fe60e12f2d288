use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use forestquiz::engine::EngineError;
use forestquiz::stats::{export_anonymized, DemographicsInput, Prediction};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::store::{SessionStore, StoreError};

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<SessionStore>,
    pub admin_token: Option<String>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/next", get(next_question))
        .route("/api/sessions/{id}/answers", post(answer))
        .route("/api/sessions/{id}/result", get(result))
        .route("/api/sessions/{id}/demographics", post(demographics))
        .route("/api/admin/export", get(export))
        .with_state(state)
}

/// Error body: `{"error": "<code>", "message": "<detail>"}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let msg = e.to_string();
        let (status, code) = match &e {
            StoreError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            StoreError::Engine(EngineError::AlreadyAnswered(_)) => (StatusCode::CONFLICT, "already_answered"),
            StoreError::Engine(EngineError::AlreadyComplete) => (StatusCode::CONFLICT, "already_complete"),
            StoreError::Engine(EngineError::Incomplete) => (StatusCode::CONFLICT, "incomplete"),
            StoreError::Engine(EngineError::UnknownQuestion(_)) => (StatusCode::UNPROCESSABLE_ENTITY, "unknown_question"),
            StoreError::Engine(EngineError::InvalidChoice(_)) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_choice"),
            StoreError::Engine(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid"),
            StoreError::Intake(_) => (StatusCode::UNPROCESSABLE_ENTITY, "implausible_input"),
            StoreError::DemographicsRecorded => (StatusCode::CONFLICT, "demographics_recorded"),
            StoreError::Log(_) | StoreError::Replay { .. } => {
                log::error!("{msg}");
                (StatusCode::INTERNAL_SERVER_ERROR, "storage")
            }
        };
        ApiError::new(status, code, msg)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.code, "message": self.message }))).into_response()
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
}

async fn create_session(State(s): State<AppState>) -> Result<(StatusCode, Json<Created>), ApiError> {
    let session_id = s.store.create()?;
    Ok((StatusCode::CREATED, Json(Created { session_id })))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QuestionView {
    pub id: String,
    pub text: String,
    pub choices: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
}

async fn next_question(State(s): State<AppState>, Path(id): Path<String>) -> Result<Json<serde_json::Value>, ApiError> {
    Ok(Json(match s.store.next_question(&id).await? {
        Some(q) => json!({
            "question": QuestionView {
                id: q.id,
                text: q.text,
                choices: q.choices.into_iter().map(|c| c.label).collect(),
                image: q.image,
            }
        }),
        None => json!({ "done": true }),
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnswerBody {
    pub question_id: String,
    pub choice_index: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Accepted {
    pub accepted: bool,
    pub complete: bool,
}

async fn answer(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<AnswerBody>,
) -> Result<Json<Accepted>, ApiError> {
    let complete = s.store.answer(&id, &body.question_id, body.choice_index).await?;
    Ok(Json(Accepted {
        accepted: true,
        complete,
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResultView {
    pub prediction: Prediction,
    pub votes_true: usize,
    pub votes_total: usize,
}

async fn result(State(s): State<AppState>, Path(id): Path<String>) -> Result<Json<ResultView>, ApiError> {
    let v = s.store.result(&id).await?;
    Ok(Json(ResultView {
        prediction: v.label.into(),
        votes_true: v.votes_true,
        votes_total: v.votes_total,
    }))
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct IntakeView {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bmi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreed: Option<bool>,
}

async fn demographics(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<DemographicsInput>,
) -> Result<Json<IntakeView>, ApiError> {
    let r = s.store.record_demographics(&id, &body).await?;
    Ok(Json(IntakeView {
        bmi: r.bmi,
        agreed: r.agreed,
    }))
}

fn authorized(headers: &HeaderMap, token: Option<&str>) -> bool {
    let Some(token) = token.filter(|t| !t.is_empty()) else {
        return false;
    };
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .is_some_and(|given| constant_time_eq(given.as_bytes(), token.as_bytes()))
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

async fn export(State(s): State<AppState>, headers: HeaderMap) -> Result<Response, ApiError> {
    if !authorized(&headers, s.admin_token.as_deref()) {
        return Err(ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or invalid admin token"));
    }
    let records = s.store.records().await;
    let body = export_anonymized(&records, s.store.salt());
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}
