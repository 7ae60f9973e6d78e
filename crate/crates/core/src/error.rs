use serde::Serialize;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// One offending row (or field) reported back from a rejected import or
/// validation pass.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    /// 1-based line number in the uploaded file, when the issue came from one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub message: String,
}

impl Issue {
    pub fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            field: None,
            message: message.into(),
        }
    }

    pub fn general(message: impl Into<String>) -> Self {
        Self {
            line: None,
            field: None,
            message: message.into(),
        }
    }

    pub fn field(field: &str, message: impl Into<String>) -> Self {
        Self {
            line: None,
            field: Some(field.into()),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid user code or password")]
    InvalidCredentials,
    #[error("account is locked")]
    AccountLocked,
    #[error("not authenticated")]
    Unauthenticated,
    #[error("forbidden: {0}")]
    Forbidden(String),
    #[error("not authorized: {0}")]
    NotAuthorized(String),
    #[error("requested privileges exceed what the actor may grant")]
    ForbiddenEscalation,
    #[error("field `{0}` cannot be changed here")]
    ForbiddenField(String),
    #[error("{0} not found")]
    NotFound(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid permission signature {0}")]
    InvalidSignature(u64),
    #[error("new password and confirmation do not match")]
    Mismatch,
    #[error("password does not meet the policy: {0}")]
    WeakPassword(String),
    #[error("search input is empty")]
    EmptyQuery,
    #[error("unknown search field `{0}`")]
    InvalidField(String),
    #[error("search expression needs refinement: {0}")]
    RefinementRequired(String),
    #[error("unknown request type {0}")]
    InvalidType(i64),
    #[error("request type requires a barcode or serial number identifying an item")]
    IdentifierRequired,
    #[error("identifier `{0}` matches more than one item")]
    IdentifierAmbiguous(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("validation failed")]
    ValidationFailed(Vec<Issue>),
    #[error("invalid property: {0}")]
    InvalidProperty(String),
    #[error("invalid reference: {0}")]
    InvalidReference(String),
    #[error("unknown metric `{0}`")]
    InvalidMetric(String),
    #[error("conflict")]
    Conflict(Vec<Issue>),
    #[error("invalid input")]
    InvalidInput(Vec<Issue>),
    #[error("rows outside the caller's scope")]
    ForbiddenRow(Vec<Issue>),
    #[error("payload of {size} bytes exceeds the {limit} byte limit")]
    TooLarge { size: usize, limit: usize },
    #[error("confirmation required")]
    ConfirmationRequired { token: String },
    #[error("backup archive is corrupt: {0}")]
    CorruptArchive(String),
    #[error("target store is not empty; pass the overwrite flag to replace it")]
    OverwriteRequired,
    #[error("store is partially initialized: {0}")]
    MigrationConflict(String),
    #[error("backup failed: {0}")]
    BackupFailed(String),
    #[error("storage error: {0}")]
    Storage(String),
    #[error("injected fault at {0}")]
    InjectedFault(&'static str),
}

impl Error {
    /// Stable machine-readable code; the gateway exposes only these.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidCredentials => "invalid-credentials",
            Error::AccountLocked => "account-locked",
            Error::Unauthenticated => "unauthenticated",
            Error::Forbidden(_) => "forbidden",
            Error::NotAuthorized(_) => "not-authorized",
            Error::ForbiddenEscalation => "forbidden-escalation",
            Error::ForbiddenField(_) => "forbidden-field",
            Error::NotFound(_) => "not-found",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::InvalidSignature(_) => "invalid-signature",
            Error::Mismatch => "mismatch",
            Error::WeakPassword(_) => "weak-password",
            Error::EmptyQuery => "empty-query",
            Error::InvalidField(_) => "invalid-field",
            Error::RefinementRequired(_) => "refinement-required",
            Error::InvalidType(_) => "invalid-type",
            Error::IdentifierRequired => "identifier-required",
            Error::IdentifierAmbiguous(_) => "identifier-ambiguous",
            Error::InvalidState(_) => "invalid-state",
            Error::ValidationFailed(_) => "validation-failed",
            Error::InvalidProperty(_) => "invalid-property",
            Error::InvalidReference(_) => "invalid-reference",
            Error::InvalidMetric(_) => "invalid-metric",
            Error::Conflict(_) => "conflict",
            Error::InvalidInput(_) => "invalid-input",
            Error::ForbiddenRow(_) => "forbidden-row",
            Error::TooLarge { .. } => "too-large",
            Error::ConfirmationRequired { .. } => "confirmation-required",
            Error::CorruptArchive(_) => "corrupt-archive",
            Error::OverwriteRequired => "overwrite-required",
            Error::MigrationConflict(_) => "migration-conflict",
            Error::BackupFailed(_) => "backup-failed",
            Error::Storage(_) | Error::InjectedFault(_) => "internal",
        }
    }

    /// Row-level details carried by import and validation failures.
    pub fn issues(&self) -> &[Issue] {
        match self {
            Error::ValidationFailed(v)
            | Error::Conflict(v)
            | Error::InvalidInput(v)
            | Error::ForbiddenRow(v) => v,
            _ => &[],
        }
    }

    pub(crate) fn forbidden(msg: impl Into<String>) -> Self {
        Error::Forbidden(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn not_found(what: impl Into<String>) -> Self {
        Error::NotFound(what.into())
    }
}

impl From<rusqlite::Error> for Error {
    fn from(e: rusqlite::Error) -> Self {
        Error::Storage(e.to_string())
    }
}

/// Every code [`Error::code`] can produce, plus the gateway-only ones.
pub const ERROR_CODES: &[&str] = &[
    "invalid-credentials",
    "account-locked",
    "unauthenticated",
    "forbidden",
    "not-authorized",
    "forbidden-escalation",
    "forbidden-field",
    "not-found",
    "invalid-argument",
    "invalid-signature",
    "mismatch",
    "weak-password",
    "empty-query",
    "invalid-field",
    "refinement-required",
    "invalid-type",
    "identifier-required",
    "identifier-ambiguous",
    "invalid-state",
    "validation-failed",
    "invalid-property",
    "invalid-reference",
    "invalid-metric",
    "conflict",
    "invalid-input",
    "forbidden-row",
    "too-large",
    "confirmation-required",
    "corrupt-archive",
    "overwrite-required",
    "migration-conflict",
    "backup-failed",
    "internal",
    "bad-request",
];
