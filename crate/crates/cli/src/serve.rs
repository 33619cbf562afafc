//! HTTP surface: one POST route per command, request bodies mirror the
//! command's request struct.
//!
//! | route         | body              | response          |
//! |---------------|-------------------|-------------------|
//! | `POST /ingest`| `IngestRequest`   | `IngestSummary`   |
//! | `POST /run`   | `RunRequest`      | run status        |
//! | `POST /replay`| `ReplayRequest`   | `ReplayReport`    |
//! | `POST /audit` | `AuditRequest`    | `AuditReport`     |
//! | `POST /score` | `ScoreRequest`    | `ScoreOutput`     |
//! | `POST /stats` | `StatsRequest`    | test result       |
//! | `POST /usage` | `{"paths": [..]}` | `UsageReport`     |
//! | `GET /matrix` |                   | default access matrix |
//!
//! Input errors answer 400, failed runs 422 with the failure record.

use std::net::SocketAddr;
use std::path::PathBuf;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use omgs_core::roles::AccessMatrix;

use crate::audit::{cmd_audit, AuditRequest};
use crate::error::RunFailed;
use crate::ingest::{cmd_ingest, IngestRequest};
use crate::replay::{cmd_replay, ReplayRequest};
use crate::run::{cmd_run, run_summary_json, RunRequest};
use crate::score::{cmd_score, ScoreRequest};
use crate::stats::{cmd_stats, StatsRequest};
use crate::usage::cmd_usage;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UsageRequest {
    pub paths: Vec<PathBuf>,
}

struct ApiError(StatusCode, Value);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

impl From<anyhow::Error> for ApiError {
    fn from(e: anyhow::Error) -> Self {
        let status = if e.downcast_ref::<RunFailed>().is_some() {
            StatusCode::UNPROCESSABLE_ENTITY
        } else {
            StatusCode::BAD_REQUEST
        };
        ApiError(status, json!({"error": format!("{e:#}")}))
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

async fn blocking<F>(f: F) -> ApiResult
where
    F: FnOnce() -> anyhow::Result<Value> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => Ok(Json(r?)),
        Err(e) => Err(ApiError(StatusCode::INTERNAL_SERVER_ERROR, json!({"error": e.to_string()}))),
    }
}

fn to_value<T: Serialize>(v: T) -> anyhow::Result<Value> {
    Ok(serde_json::to_value(v)?)
}

async fn ingest(Json(req): Json<IngestRequest>) -> ApiResult {
    blocking(move || to_value(cmd_ingest(&req)?)).await
}

async fn run(Json(req): Json<RunRequest>) -> ApiResult {
    let report = match tokio::task::spawn_blocking(move || cmd_run(&req)).await {
        Ok(r) => r?,
        Err(e) => return Err(ApiError(StatusCode::INTERNAL_SERVER_ERROR, json!({"error": e.to_string()}))),
    };
    let body = run_summary_json(&report);
    if report.is_valid() {
        Ok(Json(body))
    } else {
        Err(ApiError(StatusCode::UNPROCESSABLE_ENTITY, body))
    }
}

async fn replay(Json(req): Json<ReplayRequest>) -> ApiResult {
    blocking(move || to_value(cmd_replay(&req)?)).await
}

async fn audit(Json(req): Json<AuditRequest>) -> ApiResult {
    blocking(move || to_value(cmd_audit(&req)?)).await
}

async fn score(Json(req): Json<ScoreRequest>) -> ApiResult {
    blocking(move || to_value(cmd_score(&req)?)).await
}

async fn stats(Json(req): Json<StatsRequest>) -> ApiResult {
    blocking(move || cmd_stats(&req)).await
}

async fn usage(Json(req): Json<UsageRequest>) -> ApiResult {
    blocking(move || to_value(cmd_usage(&req.paths)?)).await
}

async fn matrix() -> Json<AccessMatrix> {
    Json(AccessMatrix::default())
}

pub fn router() -> Router {
    Router::new()
        .route("/ingest", post(ingest))
        .route("/run", post(run))
        .route("/replay", post(replay))
        .route("/audit", post(audit))
        .route("/score", post(score))
        .route("/stats", post(stats))
        .route("/usage", post(usage))
        .route("/matrix", get(matrix))
}

/// Binds `addr` and returns the bound address with the server future.
pub async fn bind(
    addr: SocketAddr,
) -> anyhow::Result<(SocketAddr, impl std::future::Future<Output = std::io::Result<()>>)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    Ok((local, async move { axum::serve(listener, router()).await }))
}
