use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use shuttle_core::Error as CoreError;

/// An error response with a machine-readable `reason`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub reason: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, reason: &'static str, message: impl Into<String>) -> Self {
        Self { status, reason, message: message.into() }
    }

    pub fn unknown_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session {id}"))
    }

    pub fn not_found(reason: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, reason, message)
    }

    pub fn conflict(reason: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, reason, message)
    }

    pub fn unprocessable(reason: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, reason, message)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({}): {}", self.status.as_u16(), self.reason, self.message)
    }
}

impl std::error::Error for ApiError {}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        let message = e.to_string();
        let reason = match &e {
            CoreError::CandidateListFull(_) => return Self::conflict("candidate_list_full", message),
            CoreError::SpotNotInRegion { .. } => "spot_not_in_region",
            CoreError::UnknownMetric(_) => "unknown_metric",
            CoreError::MissingLeg { .. } => "missing_leg",
            CoreError::SpotNotSnappable { .. } => "spot_not_snappable",
            CoreError::TooFewSpots { .. } => "too_few_spots",
            CoreError::SilhouetteUndefined => "silhouette_undefined",
            CoreError::DegenerateSites(_) => "degenerate_sites",
            CoreError::UndefinedBearing => "undefined_bearing",
            CoreError::MalformedHeader(_) | CoreError::Parse { .. } | CoreError::Csv(_) | CoreError::Json(_) => {
                "malformed_dataset"
            }
            CoreError::Io(_) => "dataset_unreadable",
            CoreError::InvalidInput(_) => "invalid_input",
        };
        Self::unprocessable(reason, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"reason": self.reason, "message": self.message}))).into_response()
    }
}
