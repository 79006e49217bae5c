use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use urgency::active::ActiveError;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),
    #[error("no session `{0}`")]
    NotFound(String),
    #[error("{message}")]
    Conflict { message: String, ids: Vec<String> },
    #[error("{0}")]
    Unavailable(String),
    #[error("{0}")]
    Internal(String),
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: String,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    ids: &'a [String],
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict { .. } => StatusCode::CONFLICT,
            ApiError::Unavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn conflict(e: &ActiveError, ids: Vec<String>) -> Self {
        ApiError::Conflict {
            message: e.to_string(),
            ids,
        }
    }
}

impl From<ActiveError> for ApiError {
    fn from(e: ActiveError) -> Self {
        match e {
            ActiveError::NotPending(ref ids) | ActiveError::DuplicateInSubmission(ref ids) => {
                let ids = ids.clone();
                ApiError::conflict(&e, ids)
            }
            ActiveError::NoModel | ActiveError::BatchOutstanding(_) | ActiveError::Complete => {
                ApiError::conflict(&e, Vec::new())
            }
            ActiveError::InvalidSchedule(_)
            | ActiveError::PoolTooSmall { .. }
            | ActiveError::DuplicatePoolId(_)
            | ActiveError::InvalidBatchSize { .. } => ApiError::BadRequest(e.to_string()),
            ActiveError::ReplayMismatch(_)
            | ActiveError::Model(_)
            | ActiveError::Io(_)
            | ActiveError::Parse { .. } => ApiError::Internal(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let ids = match &self {
            ApiError::Conflict { ids, .. } => ids.as_slice(),
            _ => &[],
        };
        let body = ErrorBody {
            error: self.to_string(),
            ids,
        };
        (self.status(), Json(body)).into_response()
    }
}
