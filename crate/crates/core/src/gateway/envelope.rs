//! The JSON envelope every API response uses, and the error mapping.

use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Issue};
use crate::page::{PageControls, ResultPage};
use crate::render::Document;

pub const SESSION_COOKIE: &str = "uuis_session";

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Pagination {
    pub page_index: usize,
    pub page_size: usize,
    pub page_count: usize,
    pub total_count: usize,
    pub controls: PageControls,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Pagination {
    pub fn of<T>(p: &ResultPage<T>) -> Self {
        Self {
            page_index: p.page_index,
            page_size: p.page_size,
            page_count: p.page_count,
            total_count: p.total_count,
            controls: p.controls,
            note: p.note.clone(),
        }
    }
}

#[derive(Debug)]
pub enum Reply {
    Data(Value),
    Page(Value, Pagination),
    Doc(Document),
    /// A fresh session: data plus the cookie carrying its token.
    Login(Value, String),
}

pub fn data<T: Serialize>(v: T) -> Reply {
    Reply::Data(serde_json::to_value(v).unwrap_or(Value::Null))
}

pub fn paged<T: Serialize>(p: ResultPage<T>) -> Reply {
    let pagination = Pagination::of(&p);
    Reply::Page(serde_json::to_value(p.rows).unwrap_or(Value::Null), pagination)
}

impl IntoResponse for Reply {
    fn into_response(self) -> Response {
        match self {
            Reply::Data(d) => axum::Json(json!({ "status": "ok", "data": d })).into_response(),
            Reply::Page(d, p) => axum::Json(json!({ "status": "ok", "data": d, "pagination": p })).into_response(),
            Reply::Login(d, token) => {
                let mut r = axum::Json(json!({ "status": "ok", "data": d })).into_response();
                let cookie = format!("{SESSION_COOKIE}={token}; HttpOnly; Path=/; SameSite=Strict");
                if let Ok(v) = HeaderValue::from_str(&cookie) {
                    r.headers_mut().insert(header::SET_COOKIE, v);
                }
                r
            }
            Reply::Doc(doc) => {
                let disposition = if doc.content_type.starts_with("text/csv") {
                    format!("attachment; filename=\"{}\"", doc.filename)
                } else {
                    format!("inline; filename=\"{}\"", doc.filename)
                };
                let mut r = doc.body.into_response();
                let h = r.headers_mut();
                h.insert(header::CONTENT_TYPE, HeaderValue::from_static(doc.content_type));
                if let Ok(v) = HeaderValue::from_str(&disposition) {
                    h.insert(header::CONTENT_DISPOSITION, v);
                }
                r
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub redirect: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub issues: Vec<Issue>,
    /// Token to repeat a call that needs confirmation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confirmation: Option<String>,
}

/// An error on its way to the wire.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: Box<ErrorBody>,
}

impl ApiError {
    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::plain(StatusCode::BAD_REQUEST, "bad-request", message.into())
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::plain(StatusCode::NOT_FOUND, "not-found", message.into())
    }

    pub fn internal() -> Self {
        Self::plain(StatusCode::INTERNAL_SERVER_ERROR, "internal", "internal error".into())
    }

    fn plain(status: StatusCode, code: &'static str, message: String) -> Self {
        Self {
            status,
            body: Box::new(ErrorBody { code, message, field: None, redirect: None, issues: Vec::new(), confirmation: None }),
        }
    }

    pub fn with_redirect(mut self, to: &str) -> Self {
        self.body.redirect = Some(to.into());
        self
    }
}

pub fn status_of(e: &Error) -> StatusCode {
    match e {
        Error::InvalidCredentials | Error::Unauthenticated => StatusCode::UNAUTHORIZED,
        Error::AccountLocked => StatusCode::LOCKED,
        Error::Forbidden(_)
        | Error::NotAuthorized(_)
        | Error::ForbiddenEscalation
        | Error::ForbiddenField(_)
        | Error::ForbiddenRow(_) => StatusCode::FORBIDDEN,
        Error::NotFound(_) => StatusCode::NOT_FOUND,
        Error::Conflict(_) | Error::InvalidState(_) | Error::OverwriteRequired | Error::MigrationConflict(_) => {
            StatusCode::CONFLICT
        }
        Error::TooLarge { .. } => StatusCode::PAYLOAD_TOO_LARGE,
        Error::ConfirmationRequired { .. } => StatusCode::PRECONDITION_REQUIRED,
        Error::Storage(_) | Error::InjectedFault(_) | Error::BackupFailed(_) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::BAD_REQUEST,
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = status_of(&e);
        let code = e.code();
        let message = if code == "internal" { "internal error".to_string() } else { e.to_string() };
        let field = match &e {
            Error::ForbiddenField(f) | Error::InvalidField(f) => Some(f.clone()),
            _ => e.issues().iter().find_map(|i| i.field.clone()),
        };
        let redirect = matches!(e, Error::Unauthenticated).then(|| "/login".to_string());
        let confirmation = match &e {
            Error::ConfirmationRequired { token } => Some(token.clone()),
            _ => None,
        };
        Self {
            status,
            body: Box::new(ErrorBody { code, message, field, redirect, issues: e.issues().to_vec(), confirmation }),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, axum::Json(json!({ "status": "error", "error": self.body }))).into_response()
    }
}
