use std::sync::Arc;

use axum::body::Body;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mkg_core::qa::{item_card, ItemCard, Payload, QaError};
use mkg_core::storyboard::{generate_storyboard, PathSelector, Storyboard, StoryboardError};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::AppState;

type Shared = State<Arc<AppState>>;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "bad_request",
            message: message.into(),
        }
    }

    fn not_found(code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            code,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            code: "internal",
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.code, "message": self.message}))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl From<QaError> for ApiError {
    fn from(e: QaError) -> Self {
        match e {
            QaError::UnknownItem(id) => ApiError::not_found("unknown_item", format!("no item {id:?}")),
            other => ApiError::internal(other.to_string()),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRequest {
    pub session_id: String,
    pub text: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectRequest {
    pub item_id: String,
}

#[derive(Serialize)]
struct QueryResponse {
    session_id: String,
    intent: mkg_core::qa::Intent,
    payload: Payload,
}

async fn query(
    State(state): Shared,
    body: Result<Json<QueryRequest>, JsonRejection>,
) -> Result<Json<QueryResponse>, ApiError> {
    let Json(req) = body?;
    if req.session_id.trim().is_empty() {
        return Err(ApiError::bad_request("empty session_id"));
    }
    if req.text.trim().is_empty() {
        return Err(ApiError::bad_request("empty text"));
    }
    let session = state.sessions.get_or_create(&req.session_id);
    let mut session = session.lock();
    let r = state.engine.handle(&req.text, &mut session)?;
    Ok(Json(QueryResponse {
        session_id: req.session_id,
        intent: r.intent,
        payload: r.payload,
    }))
}

async fn item(State(state): Shared, Path(id): Path<String>) -> Result<Json<ItemCard>, ApiError> {
    Ok(Json(item_card(&state.engine.kg, &id)?))
}

async fn select(
    State(state): Shared,
    Path(sid): Path<String>,
    body: Result<Json<SelectRequest>, JsonRejection>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let Json(req) = body?;
    let session = state.sessions.get_or_create(&sid);
    session.lock().select(&state.engine.kg, &req.item_id)?;
    Ok(Json(json!({"ok": true, "session_id": sid, "item_id": req.item_id})))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoryboardParams {
    /// Index into the item's sorted cognitive paths.
    path: Option<usize>,
    /// Entity id the chosen path must pass through.
    via: Option<String>,
}

async fn storyboard(
    State(state): Shared,
    Path(id): Path<String>,
    params: Result<Query<StoryboardParams>, QueryRejection>,
) -> Result<Json<Storyboard>, ApiError> {
    let Query(p) = params?;
    let selector = match (p.path, p.via) {
        (Some(_), Some(_)) => return Err(ApiError::bad_request("give at most one of path and via")),
        (Some(n), None) => PathSelector::Nth(n),
        (None, Some(v)) => PathSelector::Through(v),
        (None, None) => PathSelector::First,
    };
    generate_storyboard(&state.engine.kg, &id, &selector, &state.story_templates)
        .map(Json)
        .map_err(|e| match e {
            StoryboardError::UnknownItem(_) => ApiError::not_found("unknown_item", e.to_string()),
            StoryboardError::NoPath(_) => ApiError::not_found("no_path", e.to_string()),
            StoryboardError::NoSelection(_) => ApiError::not_found("no_selection", e.to_string()),
            other => ApiError::internal(other.to_string()),
        })
}

#[derive(Debug, Deserialize)]
struct SearchParams {
    q: Option<String>,
    k: Option<usize>,
}

async fn search(
    State(state): Shared,
    params: Result<Query<SearchParams>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(p) = params?;
    let q = p.q.filter(|q| !q.trim().is_empty()).ok_or_else(|| ApiError::bad_request("missing q"))?;
    let k = p.k.unwrap_or(state.engine.config.top_k);
    if k == 0 {
        return Err(ApiError::bad_request("k must be at least 1"));
    }
    match state.engine.search(&q, k) {
        Ok(hits) => Ok(Json(hits).into_response()),
        Err(QaError::Retrieval(mkg_core::retrieval::RetrievalError::EmptyCatalog)) => {
            Ok(Json(Vec::<()>::new()).into_response())
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Deserialize)]
struct MatchParams {
    text: Option<String>,
    k: Option<usize>,
}

async fn match_images(
    State(state): Shared,
    params: Result<Query<MatchParams>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(p) = params?;
    let m = state
        .matcher
        .as_ref()
        .ok_or_else(|| ApiError::not_found("no_index", "no checkpoint and index configured"))?;
    let text = p.text.filter(|t| !t.trim().is_empty()).ok_or_else(|| ApiError::bad_request("missing text"))?;
    let k = p.k.unwrap_or(5);
    if k == 0 {
        return Err(ApiError::bad_request("k must be at least 1"));
    }
    let hits = m
        .index
        .match_text(&m.encoders, &text, k)
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(hits).into_response())
}

async fn image(State(state): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    let path = state
        .images
        .get(&id)
        .ok_or_else(|| ApiError::not_found("unknown_image", format!("no image {id:?}")))?;
    let bytes = std::fs::read(path).map_err(|e| ApiError::internal(format!("{}: {e}", path.display())))?;
    let mime = match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => "image/x-portable-graymap",
        Some("ppm") => "image/x-portable-pixmap",
        _ => "application/octet-stream",
    };
    Ok(([(header::CONTENT_TYPE, mime)], Body::from(bytes)).into_response())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/query", post(query))
        .route("/api/items/{id}", get(item))
        .route("/api/items/{id}/storyboard", get(storyboard))
        .route("/api/sessions/{sid}/select", post(select))
        .route("/api/search", get(search))
        .route("/api/match", get(match_images))
        .route("/api/images/{id}", get(image))
        .fallback(|| async { ApiError::not_found("not_found", "no such endpoint") })
        .with_state(state)
}
