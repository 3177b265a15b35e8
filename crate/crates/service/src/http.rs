use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use alp_core::market::{market_query, MarketRule};

use crate::error::ServiceError;
use crate::service::ExperimentService;

type Shared = Arc<ExperimentService>;

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::Parse(_) | ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::BudgetExceeded { .. } => StatusCode::CONFLICT,
            ServiceError::UnknownSession(_) | ServiceError::UnknownExperiment { .. } | ServiceError::UnknownConfig(_) => {
                StatusCode::NOT_FOUND
            }
            ServiceError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            ServiceError::Parse(_) => "parse",
            ServiceError::Validation(_) => "validation",
            ServiceError::BudgetExceeded { .. } => "budget",
            ServiceError::UnknownSession(_) => "unknown_session",
            ServiceError::UnknownExperiment { .. } => "unknown_experiment",
            ServiceError::UnknownConfig(_) => "unknown_config",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::Io(_) => "io",
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.kind(), "message": self.to_string() });
        match &self {
            ServiceError::Parse(e) => {
                body["line"] = json!(e.line());
                body["column"] = json!(e.column());
            }
            ServiceError::Validation(report) => {
                body["violations"] = json!(report.hard);
                body["warnings"] = json!(report.soft);
            }
            ServiceError::BudgetExceeded { requested, remaining } => {
                body["requested"] = json!(requested);
                body["remaining"] = json!(remaining);
            }
            _ => {}
        }
        (self.status(), Json(body)).into_response()
    }
}

#[derive(Debug, Default, Deserialize)]
struct NewSession {
    config: Option<String>,
    budget: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct ConfigQuery {
    config: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ItemQuery {
    item: String,
}

/// Run blocking service work off the async executor.
async fn blocking<T, F>(f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e.to_string())))?
}

fn utf8(body: Bytes) -> Result<String, ServiceError> {
    String::from_utf8(body.to_vec()).map_err(|_| ServiceError::BadRequest("body is not UTF-8".into()))
}

async fn create_session(State(svc): State<Shared>, body: Bytes) -> Result<Response, ServiceError> {
    let req: NewSession = if body.iter().all(u8::is_ascii_whitespace) {
        NewSession::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ServiceError::BadRequest(e.to_string()))?
    };
    let info = blocking(move || svc.create_session(req.config.as_deref(), req.budget)).await?;
    Ok((StatusCode::CREATED, Json(info)).into_response())
}

async fn list_sessions(State(svc): State<Shared>) -> Json<Vec<String>> {
    Json(svc.session_ids())
}

async fn get_session(State(svc): State<Shared>, Path(sid): Path<String>) -> Result<Response, ServiceError> {
    Ok(Json(svc.session_info(&sid)?).into_response())
}

async fn submit(State(svc): State<Shared>, Path(sid): Path<String>, body: Bytes) -> Result<Response, ServiceError> {
    let text = utf8(body)?;
    let resp = blocking(move || svc.perform(&sid, &text)).await?;
    Ok(Json(resp).into_response())
}

async fn get_experiment(
    State(svc): State<Shared>,
    Path((sid, id)): Path<(String, u64)>,
) -> Result<Response, ServiceError> {
    let rec = blocking(move || svc.experiment(&sid, id)).await?;
    Ok(Json(rec).into_response())
}

async fn get_budget(State(svc): State<Shared>, Path(sid): Path<String>) -> Result<Response, ServiceError> {
    Ok(Json(svc.budget(&sid)?).into_response())
}

async fn get_timeline(State(svc): State<Shared>, Path(sid): Path<String>) -> Result<Response, ServiceError> {
    let timeline = svc.timeline(&sid)?;
    Ok(Json(json!({
        "timeline": timeline,
        "summary": timeline.summary_table(),
    }))
    .into_response())
}

async fn replay(State(svc): State<Shared>, Path(sid): Path<String>) -> Result<Response, ServiceError> {
    let fresh = blocking(move || {
        let fresh = svc.replay(&sid)?;
        svc.session_info(&fresh)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(fresh)).into_response())
}

async fn validate(
    State(svc): State<Shared>,
    Query(q): Query<ConfigQuery>,
    body: Bytes,
) -> Result<Response, ServiceError> {
    let text = utf8(body)?;
    Ok(Json(svc.check_recipe(q.config.as_deref(), &text)?).into_response())
}

async fn list_configs(State(svc): State<Shared>) -> Json<Vec<String>> {
    Json(svc.config_ids())
}

async fn market(Query(q): Query<ItemQuery>) -> Response {
    let accepted = market_query(&q.item, &MarketRule::default());
    Json(json!({ "item": q.item, "accepted": accepted })).into_response()
}

pub fn router(service: Shared) -> Router {
    Router::new()
        .route("/configs", get(list_configs))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{sid}", get(get_session))
        .route("/sessions/{sid}/experiments", post(submit))
        .route("/sessions/{sid}/experiments/{id}", get(get_experiment))
        .route("/sessions/{sid}/budget", get(get_budget))
        .route("/sessions/{sid}/timeline", get(get_timeline))
        .route("/sessions/{sid}/replay", post(replay))
        .route("/validate", post(validate))
        .route("/market/query", get(market))
        .with_state(service)
}

/// Serve until ctrl-c or SIGTERM.
pub async fn serve(service: Shared, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_on(service, listener).await
}

pub async fn serve_on(service: Shared, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(service))
        .with_graceful_shutdown(shutdown_signal())
        .await
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = term.recv() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}
