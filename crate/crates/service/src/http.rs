//! HTTP routes over [`SessionService`].

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fss_core::metrics::write_results;
use serde::{Deserialize, Serialize};

use crate::export::ExportFilters;
use crate::service::SessionService;
use crate::session::Stage;
use crate::treatment::Treatment;
use crate::view::*;
use crate::ServiceError;

pub struct ApiError(pub ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(ServiceError::InvalidRequest(e.body_text()))
    }
}

pub fn status_of(e: &ServiceError) -> StatusCode {
    use ServiceError::*;
    match e {
        InvalidRequest(_) | Adjust(_) => StatusCode::BAD_REQUEST,
        UnknownSession(_) | UnknownProduct(_) => StatusCode::NOT_FOUND,
        TreatmentViolation { .. } => StatusCode::FORBIDDEN,
        TooFast { .. } => StatusCode::UNPROCESSABLE_ENTITY,
        Duplicate { .. } | OutOfOrder { .. } | AlreadySignedOff(_) | NotViewed(_) | SurveyLocked { .. } | AlreadyCompleted => {
            StatusCode::CONFLICT
        }
        Config(_) | Data(_) | Model(_) | Metric(_) | Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = status_of(&self.0);
        if status.is_server_error() {
            log::error!("{}", self.0);
        }
        let body = ErrorBody {
            error: self.0.code().to_string(),
            message: self.0.to_string(),
            duplicate: matches!(self.0, ServiceError::Duplicate { .. }),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Default, Deserialize)]
struct CreateQuery {
    treatment: Option<Treatment>,
}

async fn create_session(
    State(svc): State<Arc<SessionService>>,
    Query(q): Query<CreateQuery>,
    body: Result<Json<CreateSessionRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let Json(mut req) = body?;
    if req.treatment.is_none() {
        req.treatment = q.treatment;
    }
    let created = svc.create_session(&req)?;
    let status = if created.resumed { StatusCode::OK } else { StatusCode::CREATED };
    Ok((status, Json(created)))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionStatus {
    pub session_id: String,
    pub treatment: Treatment,
    pub products: Vec<String>,
    pub stage: Stage,
}

async fn session_status(State(svc): State<Arc<SessionService>>, Path(id): Path<String>) -> ApiResult<SessionStatus> {
    let rec = svc.snapshot(&id)?;
    Ok(Json(SessionStatus {
        session_id: rec.id.clone(),
        treatment: rec.treatment,
        products: rec.products.iter().map(|p| p.product_id.clone()).collect(),
        stage: rec.stage(),
    }))
}

#[derive(Debug, Default, Deserialize)]
struct ViewQuery {
    weeks: Option<usize>,
    at_ms: Option<u64>,
}

async fn view(
    State(svc): State<Arc<SessionService>>,
    Path((id, k)): Path<(String, usize)>,
    Query(q): Query<ViewQuery>,
) -> ApiResult<ViewPayload> {
    Ok(Json(svc.get_view(&id, k, q.weeks, q.at_ms)?))
}

async fn adjust(
    State(svc): State<Arc<SessionService>>,
    Path((id, k)): Path<(String, usize)>,
    body: Result<Json<AdjustmentRequest>, JsonRejection>,
) -> ApiResult<AdjustmentResponse> {
    let Json(req) = body?;
    Ok(Json(svc.post_adjustment(&id, k, &req.edit, req.at_ms)?))
}

async fn sign_off(
    State(svc): State<Arc<SessionService>>,
    Path((id, k)): Path<(String, usize)>,
    body: Bytes,
) -> ApiResult<SignOffResponse> {
    let req: TimedRequest = if body.iter().all(u8::is_ascii_whitespace) {
        TimedRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ServiceError::InvalidRequest(e.to_string()))?
    };
    Ok(Json(svc.sign_off(&id, k, req.at_ms)?))
}

async fn survey(
    State(svc): State<Arc<SessionService>>,
    Path(id): Path<String>,
    body: Result<Json<SurveyRequest>, JsonRejection>,
) -> ApiResult<Receipt> {
    let Json(req) = body?;
    Ok(Json(svc.submit_survey(&id, &req)?))
}

#[derive(Debug, Default, Deserialize)]
struct ExportQuery {
    #[serde(default)]
    drop_duplicates: bool,
    min_completion_seconds: Option<f64>,
    format: Option<String>,
}

async fn export(State(svc): State<Arc<SessionService>>, Query(q): Query<ExportQuery>) -> Result<Response, ApiError> {
    let filters = ExportFilters {
        drop_duplicates: q.drop_duplicates,
        min_completion_seconds: q.min_completion_seconds,
    };
    let rows = svc.export(&filters)?;
    match q.format.as_deref() {
        None | Some("csv") => {
            let mut buf = Vec::new();
            write_results(&mut buf, &rows).map_err(ServiceError::from)?;
            Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], buf).into_response())
        }
        Some("json") => Ok(Json(rows).into_response()),
        Some(other) => Err(ServiceError::InvalidRequest(format!("unknown export format '{other}'")).into()),
    }
}

async fn health() -> &'static str {
    "ok"
}

pub fn router(service: Arc<SessionService>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_status))
        .route("/sessions/{id}/products/{k}/view", get(view))
        .route("/sessions/{id}/products/{k}/adjustments", post(adjust))
        .route("/sessions/{id}/products/{k}/signoff", post(sign_off))
        .route("/sessions/{id}/survey", post(survey))
        .route("/export", get(export))
        .with_state(service)
}
