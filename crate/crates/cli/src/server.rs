//! HTTP front end of the rating service. Sessions are opaque tokens sent in
//! the `x-session-token` header; every body is JSON except the CSV export
//! and audio files.

use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tractvar_core::phones::Target;
use tractvar_core::service::{ModuleSubmission, RatingService, RatingSubmission, ServiceError};

pub const SESSION_HEADER: &str = "x-session-token";

#[derive(Clone)]
pub struct AppState {
    svc: Arc<RwLock<RatingService>>,
    audio_dir: Option<Arc<PathBuf>>,
}

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self.0 {
            ServiceError::Unauthorized => (StatusCode::UNAUTHORIZED, "unauthorized"),
            ServiceError::Forbidden(_) => (StatusCode::FORBIDDEN, "forbidden"),
            ServiceError::Validation(_) => (StatusCode::UNPROCESSABLE_ENTITY, "validation"),
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            ServiceError::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            ServiceError::Log(_) | ServiceError::Io(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "internal")
            }
        };
        (
            status,
            Json(serde_json::json!({ "error": kind, "message": self.0.to_string() })),
        )
            .into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn token(h: &HeaderMap) -> Result<&str, ApiError> {
    h.get(SESSION_HEADER)
        .and_then(|v| v.to_str().ok())
        .ok_or(ApiError(ServiceError::Unauthorized))
}

fn read(s: &AppState) -> std::sync::RwLockReadGuard<'_, RatingService> {
    s.svc.read().unwrap_or_else(|p| p.into_inner())
}

fn write(s: &AppState) -> std::sync::RwLockWriteGuard<'_, RatingService> {
    s.svc.write().unwrap_or_else(|p| p.into_inner())
}

#[derive(Deserialize)]
struct NewSession {
    rater_id: String,
}

#[derive(Deserialize)]
struct TargetQuery {
    target: Target,
}

async fn open_session(
    State(s): State<AppState>,
    Json(b): Json<NewSession>,
) -> ApiResult<impl serde::Serialize> {
    Ok(Json(write(&s).open_session(&b.rater_id)?))
}

async fn next_batch(
    State(s): State<AppState>,
    h: HeaderMap,
    Query(q): Query<TargetQuery>,
) -> ApiResult<impl serde::Serialize> {
    Ok(Json(write(&s).next_batch(token(&h)?, q.target)?))
}

async fn current_item(State(s): State<AppState>, h: HeaderMap) -> ApiResult<impl serde::Serialize> {
    Ok(Json(read(&s).current_item(token(&h)?)?))
}

async fn replay(State(s): State<AppState>, h: HeaderMap) -> ApiResult<impl serde::Serialize> {
    Ok(Json(write(&s).replay(token(&h)?)?))
}

async fn submit_rating(
    State(s): State<AppState>,
    h: HeaderMap,
    Json(b): Json<RatingSubmission>,
) -> ApiResult<impl serde::Serialize> {
    Ok(Json(write(&s).submit_rating(token(&h)?, b)?))
}

async fn training_module(
    State(s): State<AppState>,
    h: HeaderMap,
    Query(q): Query<TargetQuery>,
) -> ApiResult<impl serde::Serialize> {
    Ok(Json(read(&s).training_module(token(&h)?, q.target)?))
}

async fn submit_module(
    State(s): State<AppState>,
    h: HeaderMap,
    Json(b): Json<ModuleSubmission>,
) -> ApiResult<impl serde::Serialize> {
    Ok(Json(write(&s).submit_module(token(&h)?, b)?))
}

async fn progress(State(s): State<AppState>, h: HeaderMap) -> ApiResult<impl serde::Serialize> {
    Ok(Json(read(&s).progress(token(&h)?)?))
}

async fn export(State(s): State<AppState>) -> Result<Response, ApiError> {
    let body = read(&s).export_csv()?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], body).into_response())
}

/// Serves `<audio_dir>/<id>`; ids are single path components.
async fn audio(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    let Some(dir) = &s.audio_dir else {
        return ApiError(ServiceError::NotFound("audio is not served".into())).into_response();
    };
    let rel = Path::new(&id);
    let mut comps = rel.components();
    if !matches!(
        (comps.next(), comps.next()),
        (Some(Component::Normal(_)), None)
    ) {
        return ApiError(ServiceError::Validation(format!("bad audio id `{id}`"))).into_response();
    }
    match std::fs::read(dir.join(rel)) {
        Ok(bytes) => ([(header::CONTENT_TYPE, "application/octet-stream")], bytes).into_response(),
        Err(_) => {
            ApiError(ServiceError::NotFound(format!("audio `{id}` not found"))).into_response()
        }
    }
}

pub fn router(svc: RatingService, audio_dir: Option<PathBuf>) -> Router {
    let state = AppState {
        svc: Arc::new(RwLock::new(svc)),
        audio_dir: audio_dir.map(Arc::new),
    };
    Router::new()
        .route("/sessions", post(open_session))
        .route("/batches/next", get(next_batch))
        .route("/items/current", get(current_item))
        .route("/items/replay", post(replay))
        .route("/ratings", post(submit_rating))
        .route("/training/module", get(training_module))
        .route("/training/submit", post(submit_module))
        .route("/progress", get(progress))
        .route("/export", get(export))
        .route("/audio/{id}", get(audio))
        .with_state(state)
}
