use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use telewaypoint_core::session::SessionError;
use telewaypoint_stats::ScoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("unknown map {0:?}")]
    UnknownMap(String),
    #[error("bad order {0:?}, expected DCFirst or WCFirst")]
    BadOrder(String),
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("session already has a stream attached")]
    SessionBusy,
    #[error("session has no trials left")]
    SessionComplete,
    #[error("trial {0} has not been completed")]
    TrialIncomplete(usize),
    #[error("{instrument} already submitted for trial {trial}")]
    DuplicateSubmission { trial: usize, instrument: String },
    #[error("{0}")]
    OutOfRangeItem(ScoreError),
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("storage: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

impl ApiError {
    /// Stable machine-readable name.
    pub fn code(&self) -> String {
        match self {
            ApiError::UnknownMap(_) => "UnknownMap".into(),
            ApiError::BadOrder(_) => "BadOrder".into(),
            ApiError::UnknownSession(_) => "UnknownSession".into(),
            ApiError::SessionBusy => "SessionBusy".into(),
            ApiError::SessionComplete => "SessionComplete".into(),
            ApiError::TrialIncomplete(_) => "TrialIncomplete".into(),
            ApiError::DuplicateSubmission { .. } => "DuplicateSubmission".into(),
            ApiError::OutOfRangeItem(_) => "OutOfRangeItem".into(),
            ApiError::InsufficientData(_) => "InsufficientData".into(),
            ApiError::BadRequest(_) => "BadRequest".into(),
            ApiError::Session(e) => format!("{e:?}"),
            ApiError::Io(_) => "Storage".into(),
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::UnknownMap(_) | ApiError::BadOrder(_) | ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ApiError::OutOfRangeItem(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::CONFLICT,
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody { error: self.code(), message: self.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.body())).into_response()
    }
}
