use std::fmt;

use serde::{Deserialize, Serialize};

/// Stable, machine-readable error identifiers returned by every operation.
///
/// The wire form is the `ERR_*` string produced by [`ErrorCode::as_str`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    Bounds,
    EmptyInterval,
    LabelScope,
    Cardinality,
    InvalidEncoding,
    WeakPassword,
    Conflict,
    BadCredentials,
    Unauthenticated,
    Forbidden,
    LastAdmin,
    NotFound,
    InUse,
    BadFormat,
    Corrupt,
    TooLarge,
    BadApiKey,
    UnknownAssignee,
    NotMember,
    BadPreannotation,
    BadPage,
    Range,
    BadFraction,
    EmptyReference,
    BadRequest,
    Internal,
}

impl ErrorCode {
    pub const fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Bounds => "ERR_BOUNDS",
            ErrorCode::EmptyInterval => "ERR_EMPTY_INTERVAL",
            ErrorCode::LabelScope => "ERR_LABEL_SCOPE",
            ErrorCode::Cardinality => "ERR_CARDINALITY",
            ErrorCode::InvalidEncoding => "ERR_INVALID_ENCODING",
            ErrorCode::WeakPassword => "ERR_WEAK_PASSWORD",
            ErrorCode::Conflict => "ERR_CONFLICT",
            ErrorCode::BadCredentials => "ERR_BAD_CREDENTIALS",
            ErrorCode::Unauthenticated => "ERR_UNAUTHENTICATED",
            ErrorCode::Forbidden => "ERR_FORBIDDEN",
            ErrorCode::LastAdmin => "ERR_LAST_ADMIN",
            ErrorCode::NotFound => "ERR_NOT_FOUND",
            ErrorCode::InUse => "ERR_IN_USE",
            ErrorCode::BadFormat => "ERR_BAD_FORMAT",
            ErrorCode::Corrupt => "ERR_CORRUPT",
            ErrorCode::TooLarge => "ERR_TOO_LARGE",
            ErrorCode::BadApiKey => "ERR_BAD_API_KEY",
            ErrorCode::UnknownAssignee => "ERR_UNKNOWN_ASSIGNEE",
            ErrorCode::NotMember => "ERR_NOT_MEMBER",
            ErrorCode::BadPreannotation => "ERR_BAD_PREANNOTATION",
            ErrorCode::BadPage => "ERR_BAD_PAGE",
            ErrorCode::Range => "ERR_RANGE",
            ErrorCode::BadFraction => "ERR_BAD_FRACTION",
            ErrorCode::EmptyReference => "ERR_EMPTY_REFERENCE",
            ErrorCode::BadRequest => "ERR_BAD_REQUEST",
            ErrorCode::Internal => "ERR_INTERNAL",
        }
    }

    /// HTTP status the REST layer answers with for this code.
    pub const fn http_status(self) -> u16 {
        match self {
            ErrorCode::Bounds
            | ErrorCode::EmptyInterval
            | ErrorCode::LabelScope
            | ErrorCode::Cardinality
            | ErrorCode::InvalidEncoding
            | ErrorCode::WeakPassword
            | ErrorCode::UnknownAssignee
            | ErrorCode::NotMember
            | ErrorCode::BadPreannotation
            | ErrorCode::BadPage
            | ErrorCode::BadFraction
            | ErrorCode::EmptyReference
            | ErrorCode::BadRequest => 400,
            ErrorCode::BadCredentials | ErrorCode::Unauthenticated | ErrorCode::BadApiKey => 401,
            ErrorCode::Forbidden => 403,
            ErrorCode::NotFound => 404,
            ErrorCode::Conflict | ErrorCode::LastAdmin | ErrorCode::InUse => 409,
            ErrorCode::TooLarge => 413,
            ErrorCode::BadFormat => 415,
            ErrorCode::Range => 416,
            ErrorCode::Corrupt => 422,
            ErrorCode::Internal => 500,
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{code}: {message}")]
pub struct Error {
    pub code: ErrorCode,
    pub message: String,
    /// Offending element position for list-shaped inputs (pre-annotations).
    pub index: Option<usize>,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            index: None,
        }
    }

    pub fn at_index(mut self, index: usize) -> Self {
        self.index = Some(index);
        self
    }

    pub fn not_found(what: &str) -> Self {
        Self::new(ErrorCode::NotFound, format!("{what} not found"))
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Conflict, message)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::BadRequest, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Internal, message)
    }

    // The next three carry fixed messages so that responses cannot be used
    // to tell apart the reasons behind a rejection.

    pub fn unauthenticated() -> Self {
        Self::new(ErrorCode::Unauthenticated, "authentication required")
    }

    pub fn forbidden() -> Self {
        Self::new(ErrorCode::Forbidden, "not permitted")
    }

    pub fn bad_credentials() -> Self {
        Self::new(ErrorCode::BadCredentials, "invalid username or password")
    }

    pub fn bad_api_key() -> Self {
        Self::new(ErrorCode::BadApiKey, "invalid api key")
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::internal(format!("io: {err}"))
    }
}
