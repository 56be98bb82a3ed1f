//! JSON-over-HTTP front end.

use std::future::Future;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use super::{FeedbackRecord, FeedbackRequest, Health, NewTicket, Service, SubmitResponse};
use crate::corpus::Ticket;
use crate::error::{Error, ErrorClass};

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError(Error::Invalid(r.body_text()))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self.0.class() {
            ErrorClass::Data => StatusCode::BAD_REQUEST,
            ErrorClass::NotFound => StatusCode::NOT_FOUND,
            ErrorClass::Runtime => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T, F>(service: Arc<Service>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Service) -> crate::Result<T> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&service))
        .await
        .map_err(|e| ApiError(Error::Contract(format!("worker panicked: {e}"))))?
        .map_err(ApiError)
}

async fn submit(
    State(service): State<Arc<Service>>,
    body: Result<Json<NewTicket>, JsonRejection>,
) -> ApiResult<Json<SubmitResponse>> {
    let Json(new) = body?;
    Ok(Json(blocking(service, move |s| s.submit_ticket(&new)).await?))
}

async fn get_ticket(State(service): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<Json<Ticket>> {
    Ok(Json(service.ticket(&id)?))
}

async fn post_feedback(
    State(service): State<Arc<Service>>,
    body: Result<Json<FeedbackRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<FeedbackRecord>)> {
    let Json(req) = body?;
    let record = blocking(service, move |s| s.record_feedback(req)).await?;
    Ok((StatusCode::CREATED, Json(record)))
}

async fn list_feedback(State(service): State<Arc<Service>>) -> Json<Vec<FeedbackRecord>> {
    Json(service.feedback())
}

async fn health(State(service): State<Arc<Service>>) -> Json<Health> {
    Json(service.health())
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/tickets", post(submit))
        .route("/tickets/{id}", get(get_ticket))
        .route("/feedback", post(post_feedback).get(list_feedback))
        .route("/health", get(health))
        .with_state(service)
}

/// Serves until `shutdown` resolves. Every accepted write is already
/// durable, so stopping needs no extra flush.
pub async fn serve<F>(listener: tokio::net::TcpListener, service: Arc<Service>, shutdown: F) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, router(service))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    tracing::info!("shutting down");
}
