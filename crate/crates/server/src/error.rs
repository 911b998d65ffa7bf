use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use quill_core::bridge::BridgeError;
use quill_core::schema::{SchemaError, Violation};
use quill_core::store::StoreError;
use serde::{Deserialize, Serialize};

/// Problem-details body of every error response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub status: u16,
    /// Stable machine-readable code, e.g. `lease_held`.
    pub code: String,
    pub title: String,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub detail: String,
    pub violations: Vec<Violation>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, detail: impl Into<String>) -> Self {
        Self { status, code, detail: detail.into(), violations: Vec::new() }
    }

    pub fn unauthorized(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "unauthenticated", detail)
    }

    pub fn forbidden(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::FORBIDDEN, "forbidden", detail)
    }

    pub fn unprocessable(code: &'static str, detail: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, detail)
    }

    pub fn internal(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", detail)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Problem {
            status: self.status.as_u16(),
            code: self.code.to_string(),
            title: self.status.canonical_reason().unwrap_or("error").to_string(),
            detail: self.detail,
            violations: self.violations,
        };
        (self.status, [("content-type", "application/problem+json")], Json(body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        use StatusCode as S;
        let detail = e.to_string();
        match e {
            StoreError::PermissionDenied => Self::new(S::FORBIDDEN, "forbidden", detail),
            StoreError::NotAssigned => Self::new(S::FORBIDDEN, "not_assigned", detail),
            StoreError::ValidationFailed(violations) => {
                Self { status: S::UNPROCESSABLE_ENTITY, code: "validation_failed", detail, violations }
            }
            StoreError::InvalidSubmission(_) => Self::new(S::UNPROCESSABLE_ENTITY, "invalid_submission", detail),
            StoreError::UnknownTask(_) => Self::new(S::NOT_FOUND, "unknown_task", detail),
            StoreError::UnknownUser(_) => Self::new(S::NOT_FOUND, "unknown_user", detail),
            StoreError::DuplicateUser(_) => Self::new(S::CONFLICT, "duplicate_user", detail),
            StoreError::RoleMismatch => Self::new(S::UNPROCESSABLE_ENTITY, "role_mismatch", detail),
            StoreError::LeaseExpired(_) => Self::new(S::CONFLICT, "lease_expired", detail),
            StoreError::LeaseHeld(_) => Self::new(S::CONFLICT, "lease_held", detail),
            StoreError::AlreadyDone(_) => Self::new(S::CONFLICT, "already_done", detail),
            StoreError::Storage(_) => Self::internal(detail),
        }
    }
}

impl From<SchemaError> for ApiError {
    fn from(e: SchemaError) -> Self {
        let code = match e {
            SchemaError::MalformedDocument(_) => "malformed_document",
            SchemaError::UnknownComponentKind { .. } => "unknown_component_kind",
            SchemaError::InvalidProperties { .. } => "invalid_properties",
        };
        Self::unprocessable(code, e.to_string())
    }
}

impl From<BridgeError> for ApiError {
    fn from(e: BridgeError) -> Self {
        match e {
            BridgeError::Config(_) | BridgeError::Unsupported(_) => Self::unprocessable("backend_config", e.to_string()),
            other => Self::new(StatusCode::BAD_GATEWAY, "backend_failed", other.to_string()),
        }
    }
}
