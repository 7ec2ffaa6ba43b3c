//! Self-contained access tokens minted by the authorization server and
//! validated locally by resource servers.
//!
//! Tokens are signed, not encrypted. Clients treat them as opaque strings.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::jws::{self, JwsError};
use super::keys::{KeySetDocument, SigningKeyPair};
use crate::uma::ResourcePermission;
use crate::vocab::UsageRequirement;

const TOKEN_TYPE: &str = "at+jwt";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessTokenClaims {
    pub iss: String,
    /// Verified WebID of the requesting party, or `"anonymous"`.
    pub sub: String,
    /// Origin of the resource server the token is meant for.
    pub aud: String,
    pub iat: i64,
    pub exp: i64,
    pub jti: String,
    pub permissions: Vec<ResourcePermission>,
    pub usage: Vec<UsageRequirement>,
}

impl AccessTokenClaims {
    pub fn covers(&self, resource_id: &str, scope: crate::Scope) -> bool {
        self.permissions.iter().any(|p| p.covers(resource_id, scope))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TokenError {
    #[error("malformed token: {0}")]
    Malformed(String),
    #[error("bad signature")]
    BadSignature,
    #[error("token expired")]
    Expired,
    #[error("token not yet valid")]
    NotYetValid,
    #[error("claims violate iat < exp")]
    InvalidClaims,
}

impl From<JwsError> for TokenError {
    fn from(e: JwsError) -> Self {
        match e {
            JwsError::Malformed(m) => TokenError::Malformed(m),
            JwsError::BadSignature => TokenError::BadSignature,
        }
    }
}

pub fn mint_token(claims: &AccessTokenClaims, key: &SigningKeyPair) -> Result<String, TokenError> {
    if claims.iat >= claims.exp {
        return Err(TokenError::InvalidClaims);
    }
    Ok(jws::sign_compact(claims, key, TOKEN_TYPE))
}

/// Checks signature and validity window `iat <= clock < exp`.
pub fn verify_token(token: &str, keys: &KeySetDocument, clock: DateTime<Utc>) -> Result<AccessTokenClaims, TokenError> {
    let claims = verify_token_signature(token, keys)?;
    let now = clock.timestamp();
    if now < claims.iat {
        Err(TokenError::NotYetValid)
    } else if now >= claims.exp {
        Err(TokenError::Expired)
    } else {
        Ok(claims)
    }
}

/// Signature check only. Used when a token serves as historical evidence.
pub fn verify_token_signature(token: &str, keys: &KeySetDocument) -> Result<AccessTokenClaims, TokenError> {
    let (_, payload) = jws::verify_compact(token, keys)?;
    serde_json::from_slice(&payload).map_err(|e| TokenError::Malformed(e.to_string()))
}
