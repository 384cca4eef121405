use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use ivl_core::IvlError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ApiError {
    /// Request values outside their documented ranges.
    #[error("{0}")]
    Invalid(String),

    /// Unparseable dataset or request body.
    #[error("{0}")]
    Malformed(String),

    #[error("{0}")]
    NotFound(String),

    /// The request needs state the session does not have yet.
    #[error("{0}")]
    Conflict(String),

    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Malformed(_) => StatusCode::BAD_REQUEST,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<IvlError> for ApiError {
    fn from(e: IvlError) -> Self {
        match e {
            IvlError::Domain(_) | IvlError::Validation(_) | IvlError::Degenerate(_) => {
                ApiError::Invalid(e.to_string())
            }
            IvlError::Format(_) | IvlError::Json(_) | IvlError::Csv(_) => ApiError::Malformed(e.to_string()),
            IvlError::Io(ref io) if io.kind() == std::io::ErrorKind::NotFound => ApiError::NotFound(e.to_string()),
            IvlError::Io(_) => ApiError::Malformed(e.to_string()),
            IvlError::Cancelled => ApiError::Internal(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(json!({ "error": self.to_string() }))).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
