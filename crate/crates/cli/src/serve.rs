use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use navbench::error::SessionError;
use navbench::humanlab::{Criterion, Lab, SessionPlan};
use navbench::Error;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use crate::CliError;

#[derive(Clone)]
struct AppState {
    lab: Arc<Lab>,
    criterion: Criterion,
}

struct ApiError(Error);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::Session(SessionError::UnknownSession(_) | SessionError::UnknownQuestion(_)) => StatusCode::NOT_FOUND,
            Error::Session(SessionError::Expired(_)) => StatusCode::GONE,
            Error::Session(
                SessionError::Duplicate(_) | SessionError::OutOfOrder { .. } | SessionError::Complete(_),
            ) => StatusCode::CONFLICT,
            Error::Config(_) | Error::Analysis(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.0.code(), "message": self.0.to_string() }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

/// Plan as shown to participants: question order only, no check flags.
#[derive(Serialize)]
struct PublicPlan {
    session_id: String,
    question_ids: Vec<String>,
    total: usize,
    time_budget_secs: u64,
    created_at_ms: u64,
}

impl From<SessionPlan> for PublicPlan {
    fn from(plan: SessionPlan) -> Self {
        PublicPlan {
            session_id: plan.session_id,
            total: plan.questions.len(),
            question_ids: plan.questions.into_iter().map(|q| q.question_id).collect(),
            time_budget_secs: plan.time_budget_secs,
            created_at_ms: plan.created_at_ms,
        }
    }
}

#[derive(Deserialize)]
struct AnswerBody {
    question_id: String,
    answer: String,
    #[serde(default)]
    elapsed_ms: u64,
}

#[derive(Deserialize)]
struct ResultsQuery {
    criterion: Option<String>,
    format: Option<String>,
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> navbench::Result<T> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(Error::Config(format!("worker failed: {e}"))))?
        .map_err(ApiError)
}

async fn create_session(State(app): State<AppState>) -> Result<(StatusCode, Json<PublicPlan>), ApiError> {
    let plan = blocking(move || app.lab.create_session()).await?;
    Ok((StatusCode::CREATED, Json(plan.into())))
}

async fn next_question(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let sid = id.clone();
    Ok(match blocking(move || app.lab.next_question(&sid)).await? {
        Some(view) => Json(json!({ "complete": false, "question": view })).into_response(),
        None => Json(json!({ "complete": true, "session_id": id })).into_response(),
    })
}

async fn submit_answer(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<AnswerBody>,
) -> Result<Response, ApiError> {
    let ack = blocking(move || app.lab.submit_answer(&id, &body.question_id, &body.answer, body.elapsed_ms)).await?;
    Ok((StatusCode::CREATED, Json(ack)).into_response())
}

async fn results(State(app): State<AppState>, Query(q): Query<ResultsQuery>) -> Result<Response, ApiError> {
    let criterion = match q.criterion {
        Some(name) => name.parse()?,
        None => app.criterion,
    };
    let scores = blocking(move || app.lab.results(criterion)).await?;
    Ok(match q.format.as_deref() {
        Some("json") => Json(scores).into_response(),
        _ => ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], scores.to_csv()).into_response(),
    })
}

pub fn router(lab: Arc<Lab>, criterion: Criterion, static_dir: Option<PathBuf>) -> Router {
    let app = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/next", get(next_question))
        .route("/sessions/{id}/answers", post(submit_answer))
        .route("/admin/results", get(results))
        .with_state(AppState { lab, criterion });
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

pub fn serve(lab: Lab, addr: SocketAddr, criterion: Criterion, static_dir: Option<PathBuf>) -> Result<(), CliError> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(Error::Io)?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::new("E_BIND", format!("cannot listen on {addr}: {e}")))?;
        let local = listener.local_addr().map_err(Error::Io)?;
        eprintln!("listening on http://{local}");
        axum::serve(listener, router(Arc::new(lab), criterion, static_dir))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::from(Error::Io(e)))
    })
}
