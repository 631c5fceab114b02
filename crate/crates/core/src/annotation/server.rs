//! HTTP front end of [`AnnotationService`].
//!
//! | route | reply |
//! |-------|-------|
//! | `POST /workers` | `201 {"worker_id"}` |
//! | `GET /tasks/next?worker=ID` | `200` [`TaskView`](super::TaskView), `204` when exhausted |
//! | `POST /judgments {worker, pair_id, choice}` | `201` the stored judgment |
//! | `GET /export/tally?threshold=T[&gated=false]` | tally matrix CSV |
//! | `GET /export/judgments` | judgments CSV |
//! | `GET /images/{token}.png` | argument rendered as PNG |

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use crate::stats::io::write_tally_csv;

use super::{write_judgments_csv, AnnotationError, AnnotationService, Choice};

type Shared = Arc<AnnotationService>;

pub fn router(service: Shared) -> Router {
    Router::new()
        .route("/workers", post(register))
        .route("/tasks/next", get(next_task))
        .route("/judgments", post(judge))
        .route("/export/tally", get(tally))
        .route("/export/judgments", get(judgments))
        .route("/images/{file}", get(image))
        .with_state(service)
}

fn error(status: StatusCode, code: &str, message: String) -> Response {
    (status, Json(json!({ "error": code, "message": message }))).into_response()
}

impl IntoResponse for AnnotationError {
    fn into_response(self) -> Response {
        let (status, code) = match &self {
            AnnotationError::UnknownWorker(_) => (StatusCode::NOT_FOUND, "unknown_worker"),
            AnnotationError::UnknownPair(_) => (StatusCode::NOT_FOUND, "unknown_pair"),
            AnnotationError::DuplicateJudgment { .. } => (StatusCode::CONFLICT, "duplicate_judgment"),
            AnnotationError::UnservedPair { .. } => (StatusCode::CONFLICT, "unserved_pair"),
            AnnotationError::RedundancyReached(_) => (StatusCode::CONFLICT, "redundancy_reached"),
            AnnotationError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "io"),
            _ => (StatusCode::BAD_REQUEST, "invalid"),
        };
        error(status, code, self.to_string())
    }
}

fn csv_response(body: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], body).into_response()
}

async fn register(State(s): State<Shared>) -> Response {
    (StatusCode::CREATED, Json(json!({ "worker_id": s.register_worker() }))).into_response()
}

#[derive(Deserialize)]
struct WorkerQuery {
    worker: String,
}

async fn next_task(State(s): State<Shared>, Query(q): Query<WorkerQuery>) -> Response {
    match s.next_pair(&q.worker) {
        Ok(Some(view)) => Json(view).into_response(),
        Ok(None) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => e.into_response(),
    }
}

#[derive(Deserialize)]
struct JudgmentBody {
    worker: String,
    pair_id: String,
    choice: Choice,
}

async fn judge(State(s): State<Shared>, Json(body): Json<JudgmentBody>) -> Response {
    match s.record_judgment(&body.worker, &body.pair_id, body.choice) {
        Ok(record) => (StatusCode::CREATED, Json(record)).into_response(),
        Err(e) => e.into_response(),
    }
}

#[derive(Deserialize)]
struct TallyQuery {
    #[serde(default)]
    threshold: Option<f64>,
    #[serde(default)]
    gated: Option<bool>,
}

async fn tally(State(s): State<Shared>, Query(q): Query<TallyQuery>) -> Response {
    let threshold = q.threshold.unwrap_or(0.0);
    match s.export_tally(threshold, q.gated.unwrap_or(true)) {
        Ok(t) => {
            let mut buf = Vec::new();
            match write_tally_csv(&mut buf, &t) {
                Ok(()) => csv_response(buf),
                Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "io", e.to_string()),
            }
        }
        Err(e) => error(StatusCode::BAD_REQUEST, "invalid", e.to_string()),
    }
}

async fn judgments(State(s): State<Shared>) -> Response {
    let mut buf = Vec::new();
    match write_judgments_csv(&mut buf, &s.judgments()) {
        Ok(()) => csv_response(buf),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "io", e.to_string()),
    }
}

async fn image(State(s): State<Shared>, Path(file): Path<String>) -> Response {
    let png = file.strip_suffix(".png").and_then(|token| s.image(token));
    match png {
        Some(bytes) => (
            [
                (header::CONTENT_TYPE, "image/png"),
                (header::CACHE_CONTROL, "private, max-age=3600"),
            ],
            bytes.as_ref().clone(),
        )
            .into_response(),
        None => error(StatusCode::NOT_FOUND, "unknown_image", format!("no image `{file}`")),
    }
}
