use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use crate::service::{RatingError, RatingService, Submission};

pub type Shared = Arc<Mutex<RatingService>>;

impl IntoResponse for RatingError {
    fn into_response(self) -> Response {
        let status = match &self {
            RatingError::Conflict { .. } => StatusCode::CONFLICT,
            RatingError::UnknownTask(_)
            | RatingError::EmptyRater
            | RatingError::ScoreCount(_)
            | RatingError::OutOfRange { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

fn bad_request(msg: String) -> Response {
    (StatusCode::BAD_REQUEST, Json(json!({ "error": msg }))).into_response()
}

#[derive(Deserialize)]
struct RaterQuery {
    rater: String,
}

async fn next_task(
    State(svc): State<Shared>,
    q: Result<Query<RaterQuery>, QueryRejection>,
) -> Result<Response, RatingError> {
    let Query(q) = match q {
        Ok(q) => q,
        Err(e) => return Ok(bad_request(e.body_text())),
    };
    let next = svc.lock().expect("rating state lock").next_task(&q.rater)?;
    Ok(Json(next).into_response())
}

async fn submit(
    State(svc): State<Shared>,
    sub: Result<Json<Submission>, JsonRejection>,
) -> Result<Response, RatingError> {
    // Malformed bodies are client errors like any other bad rating.
    let Json(sub) = match sub {
        Ok(s) => s,
        Err(e) => return Ok(bad_request(e.body_text())),
    };
    let ack = svc.lock().expect("rating state lock").submit(sub)?;
    Ok(Json(ack).into_response())
}

async fn report(State(svc): State<Shared>) -> Result<Response, RatingError> {
    match svc.lock().expect("rating state lock").aggregate() {
        Ok(r) => Ok(Json(json!({ "status": "ok", "table": r.render_table(), "report": r })).into_response()),
        Err(RatingError::NoRatings) => Ok(Json(json!({ "status": "empty" })).into_response()),
        Err(e) => Err(e),
    }
}

async fn health(State(svc): State<Shared>) -> Response {
    let s = svc.lock().expect("rating state lock");
    Json(json!({ "status": "ok", "tasks": s.tasks().len(), "ratings": s.rating_count() })).into_response()
}

/// `GET /task?rater=`, `POST /rating`, `GET /report`, `GET /health`, and
/// optionally static files from `static_dir` at `/`.
pub fn router(svc: Shared, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/task", get(next_task))
        .route("/rating", post(submit))
        .route("/report", get(report))
        .route("/health", get(health))
        .with_state(svc);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(svc: RatingService, addr: SocketAddr, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let app = router(Arc::new(Mutex::new(svc)), static_dir);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, app).await
}
