use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

use crate::SCHEMA_VERSION;

/// Error body: `{"schema_version", "error": {"status", "message", "field"?, "id"?}}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
    pub field: Option<String>,
    pub id: Option<String>,
}

impl ApiError {
    pub fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
            field: None,
            id: None,
        }
    }

    pub fn bad_field(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: Some(field.to_string()),
            ..Self::bad_request(message)
        }
    }

    pub fn unprocessable(message: impl Into<String>, field: Option<&str>) -> Self {
        Self {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            message: message.into(),
            field: field.map(str::to_string),
            id: None,
        }
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::CONFLICT,
            message: message.into(),
            field: None,
            id: None,
        }
    }

    /// Logs the cause under a fresh id and hides it from the client.
    pub fn internal(cause: impl std::fmt::Display) -> Self {
        let id = uuid::Uuid::new_v4().to_string();
        tracing::error!(%id, %cause, "internal error");
        Self {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: "internal error".into(),
            field: None,
            id: Some(id),
        }
    }
}

impl From<nephro_xai::Error> for ApiError {
    fn from(e: nephro_xai::Error) -> Self {
        use nephro_xai::Error as E;
        match e {
            E::NoMutableFeatures => ApiError::unprocessable("no mutable features", None),
            E::UnknownFeature(f) => ApiError::bad_field(&f, format!("unknown feature `{f}`")),
            e @ E::NoCounterfactual { .. } => ApiError::unprocessable(e.to_string(), None),
            E::InvalidArgument(m) => ApiError::unprocessable(m, None),
            other => ApiError::internal(other),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut err = json!({
            "status": self.status.as_u16(),
            "message": self.message,
        });
        if let Some(f) = self.field {
            err["field"] = json!(f);
        }
        if let Some(id) = self.id {
            err["id"] = json!(id);
        }
        (self.status, Json(json!({ "schema_version": SCHEMA_VERSION, "error": err }))).into_response()
    }
}
