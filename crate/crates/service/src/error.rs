use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use pdt_core::PdtError;
use serde::Serialize;

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<String>,
}

/// Error returned by a handler, rendered as JSON with a matching status code.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: &'static str,
    pub message: String,
    pub path: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            kind,
            message: message.into(),
            path: None,
        }
    }

    pub fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not-found", format!("no session `{id}`"))
    }

    pub fn stale(expected: usize, current: usize) -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "stale-event-index",
            format!("client saw event {expected}, session is at event {current}"),
        )
    }

    pub fn invalid_body(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid-request", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<PdtError> for ApiError {
    fn from(e: PdtError) -> Self {
        let message = e.to_string();
        let (status, kind) = match &e {
            PdtError::OutOfOrder { .. } => (StatusCode::CONFLICT, "out-of-order"),
            PdtError::InvalidState { .. } => (StatusCode::CONFLICT, "wrong-status"),
            PdtError::UnsupportedAction(_) => (StatusCode::CONFLICT, "unsupported-action"),
            PdtError::Closed => (StatusCode::GONE, "closed"),
            PdtError::DegenerateUpdate { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "degenerate-update"),
            PdtError::Domain(_) => (StatusCode::UNPROCESSABLE_ENTITY, "domain"),
            e if e.is_config_error() => (StatusCode::UNPROCESSABLE_ENTITY, "invalid-scenario"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "numeric"),
        };
        let path = match e {
            PdtError::Schema { path, .. } => Some(path),
            _ => None,
        };
        Self {
            status,
            kind,
            message,
            path,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.kind,
            message: self.message,
            path: self.path,
        };
        (self.status, Json(body)).into_response()
    }
}
