use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use lessonforge_core::store::StoreError;
use serde::Serialize;
use serde_json::Value;

use crate::canon::Canonical;

/// Machine-readable error codes. These strings are part of the API contract.
pub mod codes {
    pub const NOT_FOUND: &str = "not_found";
    pub const INVALID_REQUEST: &str = "invalid_request";
    pub const INVALID_ID: &str = "invalid_id";
    pub const RUN_IN_FLIGHT: &str = "run_in_flight";
    pub const INCOMPLETE_RATING: &str = "incomplete_rating";
    pub const UNKNOWN_CODES: &str = "unknown_codes";
    pub const CONSENSUS_REJECTED: &str = "consensus_rejected";
    pub const KAPPA_UNAVAILABLE: &str = "kappa_unavailable";
    pub const REGENERATE_REJECTED: &str = "regenerate_rejected";
    pub const STORE_ERROR: &str = "store_error";
    pub const INTERNAL: &str = "internal";
}

#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> ApiError {
        ApiError { status, code, message: message.into(), details: None }
    }

    pub fn with_details(mut self, details: Value) -> ApiError {
        self.details = Some(details);
        self
    }

    pub fn bad_request(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, codes::INVALID_REQUEST, message)
    }

    pub fn not_found(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::NOT_FOUND, codes::NOT_FOUND, message)
    }

    pub fn unprocessable(code: &'static str, message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> ApiError {
        match &e {
            StoreError::NotFound { .. } => ApiError::not_found(e.to_string()),
            StoreError::InvalidId(_) => ApiError::new(StatusCode::BAD_REQUEST, codes::INVALID_ID, e.to_string()),
            StoreError::Locked(_) => ApiError::new(StatusCode::CONFLICT, codes::RUN_IN_FLIGHT, e.to_string()),
            _ => {
                tracing::error!(error = %e, "store failure");
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, codes::STORE_ERROR, e.to_string())
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status;
        (status, Canonical(serde_json::json!({ "error": self }))).into_response()
    }
}
