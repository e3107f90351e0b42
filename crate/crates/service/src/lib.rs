//! HTTP facade over the evaluators: `POST /parse`, `/eval`, `/trace` and
//! `/step`, JSON in and out.
//!
//! Requests run on the blocking pool behind a semaphore; when every permit
//! is taken the server answers 429 instead of queueing. Each evaluation
//! carries a wall-clock deadline in its fuel meter, so a runaway program
//! ends with status `fuel` and `timed_out: true`.

use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use hyb_core::wire::{self, ApiError};
use serde_json::de::from_slice;
use tokio::sync::Semaphore;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

/// Server settings.
#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Wall-clock budget per request.
    pub timeout: Duration,
    /// Requests evaluated at once; more are turned away with 429.
    pub workers: usize,
    /// Origin allowed by CORS; any origin when unset.
    pub cors_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            timeout: DEFAULT_TIMEOUT,
            workers: std::thread::available_parallelism().map_or(4, |n| n.get()),
            cors_origin: None,
        }
    }
}

#[derive(Clone)]
struct AppState {
    timeout: Duration,
    permits: Arc<Semaphore>,
}

fn json(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error(e: ApiError) -> Response {
    let status = StatusCode::from_u16(e.status).unwrap_or(StatusCode::UNPROCESSABLE_ENTITY);
    json(status, wire::to_json(&e))
}

/// Decodes the body, runs `f` on the blocking pool under a permit and the
/// deadline, and serialises the answer.
async fn serve<Req, Resp, F>(state: AppState, body: Bytes, f: F) -> Response
where
    Req: serde::de::DeserializeOwned + Send + 'static,
    Resp: serde::Serialize + Send + 'static,
    F: FnOnce(Req, Duration) -> Result<Resp, ApiError> + Send + 'static,
{
    let req: Req = match from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(ApiError::bad_request(format!("invalid request body: {e}"))),
    };
    let Ok(permit) = state.permits.clone().try_acquire_owned() else {
        return json(
            StatusCode::TOO_MANY_REQUESTS,
            wire::to_json(&ApiError {
                status: 429,
                error: "server busy, try again".into(),
                diagnostics: Vec::new(),
            }),
        );
    };
    let timeout = state.timeout;
    let task = tokio::task::spawn_blocking(move || {
        let _permit = permit;
        f(req, timeout).map(|r| wire::to_json(&r))
    });
    // The fuel deadline stops evaluation; this only guards against work
    // that never ticks the meter.
    match tokio::time::timeout(timeout + Duration::from_secs(1), task).await {
        Ok(Ok(Ok(body))) => json(StatusCode::OK, body),
        Ok(Ok(Err(e))) => error(e),
        Ok(Err(_)) => json(
            StatusCode::INTERNAL_SERVER_ERROR,
            r#"{"error":"evaluation failed"}"#.to_string(),
        ),
        Err(_) => json(
            StatusCode::SERVICE_UNAVAILABLE,
            r#"{"error":"evaluation timed out"}"#.to_string(),
        ),
    }
}

async fn parse(State(s): State<AppState>, body: Bytes) -> Response {
    serve(s, body, |r: wire::ParseRequest, _| Ok(wire::handle_parse(&r))).await
}

async fn eval(State(s): State<AppState>, body: Bytes) -> Response {
    serve(s, body, |r: wire::EvalRequest, t| wire::handle_eval(&r, Some(t))).await
}

async fn trace(State(s): State<AppState>, body: Bytes) -> Response {
    serve(s, body, |r: wire::TraceRequest, t| wire::handle_trace(&r, Some(t))).await
}

async fn step(State(s): State<AppState>, body: Bytes) -> Response {
    serve(s, body, |r: wire::StepRequest, t| wire::handle_step(&r, Some(t))).await
}

async fn health() -> Response {
    json(StatusCode::OK, r#"{"ok":true}"#.to_string())
}

/// Builds the router. Fails if the CORS origin is not a valid header value.
pub fn router(cfg: &ServiceConfig) -> Result<Router, String> {
    let origin = match &cfg.cors_origin {
        Some(o) => AllowOrigin::exact(
            HeaderValue::from_str(o).map_err(|_| format!("invalid CORS origin `{o}`"))?,
        ),
        None => AllowOrigin::from(Any),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers([header::CONTENT_TYPE]);
    let state = AppState {
        timeout: cfg.timeout,
        permits: Arc::new(Semaphore::new(cfg.workers)),
    };
    Ok(Router::new()
        .route("/parse", post(parse))
        .route("/eval", post(eval))
        .route("/trace", post(trace))
        .route("/step", post(step))
        .route("/health", get(health))
        .with_state(state)
        .layer(cors))
}
