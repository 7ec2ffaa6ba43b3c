use http::StatusCode;

/// Failures of the token endpoint. `need_info` is not an error here; see
/// [`crate::TokenOutcome`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GrantError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("unsupported grant type `{0}`")]
    UnsupportedGrantType(String),
    /// Unknown, expired or already presented ticket.
    #[error("invalid grant")]
    InvalidGrant,
    #[error("invalid claim token: {0}")]
    InvalidClaimToken(String),
    #[error("invalid resource id")]
    InvalidResourceId,
    #[error("invalid scope")]
    InvalidScope,
    #[error("too many negotiation rounds")]
    TooManyRounds,
    /// The precise policy reason is logged, never returned.
    #[error("request denied")]
    RequestDenied,
}

impl GrantError {
    pub fn code(&self) -> &'static str {
        match self {
            GrantError::InvalidRequest(_) => "invalid_request",
            GrantError::UnsupportedGrantType(_) => "unsupported_grant_type",
            GrantError::InvalidGrant => "invalid_grant",
            GrantError::InvalidClaimToken(_) => "invalid_claim_token",
            GrantError::InvalidResourceId => "invalid_resource_id",
            GrantError::InvalidScope => "invalid_scope",
            GrantError::TooManyRounds => "too_many_rounds",
            GrantError::RequestDenied => "request_denied",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            GrantError::RequestDenied | GrantError::TooManyRounds => StatusCode::FORBIDDEN,
            _ => StatusCode::BAD_REQUEST,
        }
    }

    /// Description safe to show the client.
    pub fn public_description(&self) -> Option<String> {
        match self {
            GrantError::InvalidRequest(d) | GrantError::InvalidClaimToken(d) => Some(d.clone()),
            GrantError::UnsupportedGrantType(g) => Some(format!("grant type `{g}` is not supported")),
            _ => None,
        }
    }
}

/// Failures of the endpoints resource servers call.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtectionError {
    #[error("resource server not authenticated: {0}")]
    Unauthenticated(String),
    #[error("malformed request: {0}")]
    Malformed(String),
    #[error("resource already registered as {0}")]
    Duplicate(String),
    #[error("no such registration")]
    NotFound,
    #[error("invalid resource id")]
    InvalidResourceId,
    #[error("invalid scope")]
    InvalidScope,
}

impl ProtectionError {
    pub fn code(&self) -> &'static str {
        match self {
            ProtectionError::Unauthenticated(_) => "invalid_signature",
            ProtectionError::Malformed(_) => "invalid_request",
            ProtectionError::Duplicate(_) => "duplicate_resource",
            ProtectionError::NotFound => "not_found",
            ProtectionError::InvalidResourceId => "invalid_resource_id",
            ProtectionError::InvalidScope => "invalid_scope",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ProtectionError::Unauthenticated(_) => StatusCode::UNAUTHORIZED,
            ProtectionError::Duplicate(_) => StatusCode::CONFLICT,
            ProtectionError::NotFound => StatusCode::NOT_FOUND,
            _ => StatusCode::BAD_REQUEST,
        }
    }
}
