//! HTTP API for the dashboard.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::{Json, Router};
use serde::Deserialize;
use tower_http::services::ServeDir;

use crate::store::SharedStore;

pub const DEFAULT_LISTEN: &str = "0.0.0.0:8080";
pub const DEFAULT_LIMIT: usize = 100;
pub const MAX_LIMIT: usize = 1000;

const FALLBACK_INDEX: &str = "<!doctype html><title>zwitscher</title><p>No dashboard installed. \
The API is at <a href=\"/api/status\">/api/status</a> and <a href=\"/api/detections\">/api/detections</a>.</p>\n";

#[derive(Debug, Deserialize)]
struct PollParams {
    #[serde(default)]
    after: u64,
    limit: Option<usize>,
}

async fn detections(State(store): State<Arc<SharedStore>>, Query(p): Query<PollParams>) -> impl IntoResponse {
    let limit = p.limit.unwrap_or(DEFAULT_LIMIT).min(MAX_LIMIT);
    Json(store.query_since(p.after, limit))
}

async fn status(State(store): State<Arc<SharedStore>>) -> impl IntoResponse {
    Json(store.status())
}

/// API routes plus static files from `static_dir` (a placeholder page when
/// none is configured).
pub fn router(store: Arc<SharedStore>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new().route("/api/detections", get(detections)).route("/api/status", get(status)).with_state(store);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(FALLBACK_INDEX) })),
    }
}

/// Binds `addr` and serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    store: Arc<SharedStore>,
    static_dir: Option<PathBuf>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(store, static_dir)).with_graceful_shutdown(shutdown).await
}

/// Binds a listener, logging the resolved address.
pub async fn bind(addr: SocketAddr) -> std::io::Result<tokio::net::TcpListener> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    Ok(listener)
}
