//! JSON-over-HTTP front end.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::json;

use crate::error::ServiceError;
use crate::study::{Service, SubmitAnswer};

pub enum ApiError {
    Service(ServiceError),
    BadRequest(String),
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError::Service(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::BadRequest(e.body_text())
    }
}

fn status_of(e: &ServiceError) -> StatusCode {
    match e {
        ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
        ServiceError::Conflict { .. } | ServiceError::EmptyStudy(_) => StatusCode::CONFLICT,
        ServiceError::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
        ServiceError::Config(_) | ServiceError::Integrity { .. } | ServiceError::Io(_) | ServiceError::Internal(_) => {
            StatusCode::INTERNAL_SERVER_ERROR
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code, message) = match self {
            ApiError::Service(e) => (status_of(&e), e.code(), e.to_string()),
            ApiError::BadRequest(message) => (StatusCode::BAD_REQUEST, "bad_request", message),
        };
        (status, Json(json!({ "error": code, "message": message }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Runs a service call off the async workers; every call may touch disk or
/// run the estimator.
async fn blocking<T, F>(service: Arc<Service>, f: F) -> ApiResult<T>
where
    T: Serialize + Send + 'static,
    F: FnOnce(&Service) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&service))
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
        .map(Json)
        .map_err(ApiError::from)
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/studies/{study_id}/sessions", post(create_session))
        .route("/studies/{study_id}/results", get(results))
        .route("/sessions/{session_id}/next", get(next_question))
        .route("/sessions/{session_id}/answers", post(submit_answer))
        .route("/sessions/{session_id}/demographics", post(submit_demographics))
        .with_state(service)
}

async fn healthz(State(service): State<Arc<Service>>) -> Json<serde_json::Value> {
    let studies: Vec<&str> = service.study_ids().collect();
    Json(json!({ "status": "ok", "studies": studies }))
}

async fn create_session(State(service): State<Arc<Service>>, Path(study_id): Path<String>) -> Response {
    match blocking(service, move |s| s.create_session(&study_id)).await {
        Ok(body) => (StatusCode::CREATED, body).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn next_question(
    State(service): State<Arc<Service>>,
    Path(session_id): Path<String>,
) -> ApiResult<crate::session::NextQuestion> {
    blocking(service, move |s| s.next_question(&session_id)).await
}

async fn submit_answer(
    State(service): State<Arc<Service>>,
    Path(session_id): Path<String>,
    body: Result<Json<SubmitAnswer>, JsonRejection>,
) -> ApiResult<crate::study::AnswerAck> {
    let Json(request) = body?;
    blocking(service, move |s| s.submit_answer(&session_id, request)).await
}

async fn submit_demographics(
    State(service): State<Arc<Service>>,
    Path(session_id): Path<String>,
    body: Result<Json<BTreeMap<String, String>>, JsonRejection>,
) -> ApiResult<serde_json::Value> {
    let Json(demographics) = body?;
    blocking(service, move |s| s.submit_demographics(&session_id, demographics).map(|()| json!({}))).await
}

async fn results(
    State(service): State<Arc<Service>>,
    Path(study_id): Path<String>,
) -> ApiResult<Arc<crate::results::StudyResults>> {
    blocking(service, move |s| s.results(&study_id)).await
}

/// Serves until `shutdown` resolves, then drains open requests.
pub async fn serve<F>(service: Arc<Service>, listener: tokio::net::TcpListener, shutdown: F) -> std::io::Result<()>
where
    F: std::future::Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, router(service)).with_graceful_shutdown(shutdown).await
}
