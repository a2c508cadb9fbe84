//! HTTP/JSON API over sessions, fitting, feasibility and feedback.
//!
//! Routes:
//!
//! * `POST /sessions`, `GET /sessions/{id}`, `POST /sessions/{id}/events`
//! * `POST /fit`, `POST /feasible`, `POST /feedback` (stateless)
//! * `/` serves the built UI bundle when a UI directory is configured.

mod store;

pub use store::{SessionStore, StoreError};

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::distributions::{FamilyKind, LocationScaleDistribution};
use crate::feedback::{feedback_report, figure_data, FeedbackReport, FeedbackSpec, FigureData, DEFAULT_FIGURE_POINTS};
use crate::fitting::{check_feasibility, fit_all, FamilyFit, FeasibilityResult, FitError, Outcome};
use crate::judgements::{JudgementSet, ValidationReport};
use crate::session::{ElicitationSession, SessionError, SessionEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiErrorCode {
    InvalidJudgements,
    InvalidTransition,
    NotFound,
    UnsupportedVersion,
    BadRequest,
}

impl ApiErrorCode {
    fn status(self) -> StatusCode {
        match self {
            ApiErrorCode::InvalidJudgements => StatusCode::UNPROCESSABLE_ENTITY,
            ApiErrorCode::InvalidTransition => StatusCode::CONFLICT,
            ApiErrorCode::NotFound => StatusCode::NOT_FOUND,
            ApiErrorCode::UnsupportedVersion | ApiErrorCode::BadRequest => StatusCode::BAD_REQUEST,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ApiErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<ValidationReport>,
}

impl ApiError {
    fn new(code: ApiErrorCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), details: None }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(ApiErrorCode::BadRequest, message)
    }

    fn invalid_judgements(report: ValidationReport) -> Self {
        Self {
            code: ApiErrorCode::InvalidJudgements,
            message: format!("invalid judgements: {report}"),
            details: Some(report),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

impl From<FitError> for ApiError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::InvalidJudgements(r) => ApiError::invalid_judgements(r),
            other => ApiError::bad_request(other.to_string()),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::InvalidTransition { .. } => ApiError::new(ApiErrorCode::InvalidTransition, e.to_string()),
            SessionError::InvalidJudgements(r) => ApiError::invalid_judgements(r),
            SessionError::Fit(f) => f.into(),
            SessionError::UnsupportedVersion(_) => ApiError::new(ApiErrorCode::UnsupportedVersion, e.to_string()),
            other => ApiError::bad_request(other.to_string()),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(_) => ApiError::new(ApiErrorCode::NotFound, e.to_string()),
            StoreError::Session(s) => s.into(),
            StoreError::Exists(_) | StoreError::InvalidId(_) => ApiError::bad_request(e.to_string()),
            StoreError::Io(_) => ApiError::bad_request(e.to_string()),
        }
    }
}

/// JSON body parsing that reports failures as `bad_request`.
fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::bad_request(format!("request handler failed: {e}")))?
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub quantity_label: String,
}

#[derive(Debug, Deserialize)]
pub struct FitRequest {
    #[serde(flatten)]
    pub judgements: JudgementSet,
    pub families: Vec<FamilyKind>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FitResponse {
    pub fits: Vec<FamilyFit>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FamilyFeasibility {
    pub family: FamilyKind,
    pub feasibility: Outcome<FeasibilityResult>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FeasibleResponse {
    pub results: Vec<FamilyFeasibility>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigureRequest {
    pub judgements: JudgementSet,
    #[serde(default)]
    pub x_min: Option<f64>,
    #[serde(default)]
    pub x_max: Option<f64>,
    #[serde(default)]
    pub n_points: Option<usize>,
}

#[derive(Debug, Deserialize)]
pub struct FeedbackRequest {
    pub fits: Vec<LocationScaleDistribution>,
    #[serde(flatten)]
    pub spec: FeedbackSpec,
    #[serde(default)]
    pub figure: Option<FigureRequest>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FeedbackResponse {
    pub report: FeedbackReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure: Option<FigureData>,
}

type AppState = Arc<SessionStore>;

async fn create_session(State(store): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSession =
        if body.iter().all(u8::is_ascii_whitespace) { CreateSession::default() } else { parse(&body)? };
    let id = req.id.unwrap_or_else(|| uuid::Uuid::new_v4().to_string());
    let session = ElicitationSession::new(id, req.quantity_label);
    let created = blocking(move || {
        store.create(&session)?;
        Ok(session)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

async fn get_session(
    State(store): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<ElicitationSession>, ApiError> {
    Ok(Json(blocking(move || Ok(store.get(&id)?)).await?))
}

async fn post_event(
    State(store): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<ElicitationSession>, ApiError> {
    let event: SessionEvent = parse(&body)?;
    Ok(Json(blocking(move || Ok(store.apply(&id, event)?)).await?))
}

async fn post_fit(body: Bytes) -> Result<Json<FitResponse>, ApiError> {
    let req: FitRequest = parse(&body)?;
    let fits = blocking(move || Ok(fit_all(&req.families, &req.judgements)?)).await?;
    Ok(Json(FitResponse { fits }))
}

async fn post_feasible(body: Bytes) -> Result<Json<FeasibleResponse>, ApiError> {
    let req: FitRequest = parse(&body)?;
    let report = req.judgements.validate();
    if !report.is_ok() {
        return Err(ApiError::invalid_judgements(report));
    }
    if req.families.is_empty() {
        return Err(FitError::NoFamilies.into());
    }
    let results = blocking(move || {
        Ok(req
            .families
            .iter()
            .map(|&family| FamilyFeasibility { family, feasibility: check_feasibility(family, &req.judgements).into() })
            .collect())
    })
    .await?;
    Ok(Json(FeasibleResponse { results }))
}

async fn post_feedback(body: Bytes) -> Result<Json<FeedbackResponse>, ApiError> {
    let req: FeedbackRequest = parse(&body)?;
    let report = feedback_report(&req.fits, &req.spec).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let figure = match req.figure {
        None => None,
        Some(f) => {
            let range = match (f.x_min, f.x_max) {
                (Some(a), Some(b)) => Some((a, b)),
                (None, None) => None,
                _ => return Err(ApiError::bad_request("give both x_min and x_max, or neither")),
            };
            Some(
                figure_data(&req.fits, &f.judgements, range, f.n_points.unwrap_or(DEFAULT_FIGURE_POINTS))
                    .map_err(|e| ApiError::bad_request(e.to_string()))?,
            )
        }
    };
    Ok(Json(FeedbackResponse { report, figure }))
}

/// Builds the application router over `store`, optionally serving a static
/// UI bundle at `/`.
pub fn router(store: Arc<SessionStore>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/events", post(post_event))
        .route("/fit", post(post_fit))
        .route("/feasible", post(post_feasible))
        .route("/feedback", post(post_feedback))
        .with_state(store);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(addr: SocketAddr, store_dir: PathBuf, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let store = Arc::new(SessionStore::open(store_dir)?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store, ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
