use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use consent_core::{ErrorClass, PlatformError};
use serde_json::json;

/// An error response: a status and a stable code, sent as `{"error": code}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
}

impl ApiError {
    pub const NOT_FOUND: ApiError = ApiError {
        status: StatusCode::NOT_FOUND,
        code: "not_found",
    };
    pub const UNAUTHENTICATED: ApiError = ApiError {
        status: StatusCode::UNAUTHORIZED,
        code: "unauthenticated",
    };
    pub const BAD_CREDENTIALS: ApiError = ApiError {
        status: StatusCode::UNAUTHORIZED,
        code: "bad_credentials",
    };
    pub const CAP_REACHED: ApiError = ApiError {
        status: StatusCode::TOO_MANY_REQUESTS,
        code: "session_request_cap",
    };

    pub fn invalid(code: &'static str) -> Self {
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            code,
        }
    }

    pub fn internal() -> Self {
        ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            code: "internal",
        }
    }
}

impl From<PlatformError> for ApiError {
    fn from(e: PlatformError) -> Self {
        // Every flavour of "not there for you" collapses into one response.
        let (status, code) = match e.class() {
            ErrorClass::NotFound => return ApiError::NOT_FOUND,
            ErrorClass::Forbidden => (StatusCode::FORBIDDEN, e.code()),
            ErrorClass::Conflict => (StatusCode::CONFLICT, e.code()),
            ErrorClass::Invalid => (StatusCode::UNPROCESSABLE_ENTITY, e.code()),
        };
        ApiError { status, code }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.code }))).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
