//! Turns pushed claim tokens into [`VerifiedClaim`]s.
//!
//! Two formats are supported, both compact EdDSA-signed tokens:
//!
//! * OpenID Connect ID tokens yield a single `webid` claim (the `webid`
//!   member, or `sub` when absent).
//! * VC tokens carry a flat `claims` string map; each entry becomes one claim.
//!
//! Every format lives in [`formats`]; callers only pass the format URI along.

mod formats;
pub mod issue;
mod trust;

use chrono::{DateTime, Utc};
use serde::Deserialize;
use umax_core::security::jws::{self, JwsError};
use umax_core::{ClaimToken, VerifiedClaim};

pub use trust::{resolve_trust, KeySource, TrustError, TrustedIssuer};

/// Tolerated clock difference with claim issuers.
pub const CLOCK_SKEW_SECS: i64 = 30;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClaimError {
    #[error("unsupported claim token format `{0}`")]
    UnsupportedFormat(String),
    #[error("issuer `{0}` is not trusted")]
    UnknownIssuer(String),
    #[error("keys of issuer `{0}` have not been resolved")]
    UnresolvedKeys(String),
    #[error("claim token signature does not verify")]
    BadSignature,
    #[error("claim token expired")]
    Expired,
    #[error("claim token not yet valid")]
    NotYetValid,
    #[error("claim token names no subject")]
    MissingSubject,
    #[error("malformed claim token: {0}")]
    Malformed(String),
}

/// Members common to every supported format.
#[derive(Deserialize)]
struct Envelope {
    iss: String,
    iat: i64,
    exp: i64,
    #[serde(default)]
    nbf: Option<i64>,
}

pub fn supported_formats() -> impl Iterator<Item = &'static str> {
    formats::ALL.iter().map(|f| f.uri())
}

pub fn verify_claim_token(
    token: &ClaimToken,
    trust: &[TrustedIssuer],
    clock: DateTime<Utc>,
) -> Result<Vec<VerifiedClaim>, ClaimError> {
    let format = formats::ALL
        .iter()
        .find(|f| f.uri() == token.format)
        .ok_or_else(|| ClaimError::UnsupportedFormat(token.format.clone()))?;

    let (_, payload) = jws::decode_unverified(&token.raw).map_err(|e| ClaimError::Malformed(e.to_string()))?;
    let envelope: Envelope = serde_json::from_slice(&payload).map_err(|e| ClaimError::Malformed(e.to_string()))?;
    let issuer = trust
        .iter()
        .find(|t| t.issuer == envelope.iss)
        .ok_or_else(|| ClaimError::UnknownIssuer(envelope.iss.clone()))?;
    let keys = match &issuer.keys {
        KeySource::Inline(keys) => keys,
        KeySource::Uri(_) => return Err(ClaimError::UnresolvedKeys(issuer.issuer.clone())),
    };

    let (_, payload) = jws::verify_compact(&token.raw, keys).map_err(|e| match e {
        JwsError::BadSignature => ClaimError::BadSignature,
        JwsError::Malformed(m) => ClaimError::Malformed(m),
    })?;

    let now = clock.timestamp();
    let starts = envelope.nbf.unwrap_or(envelope.iat).max(envelope.iat);
    if now < starts - CLOCK_SKEW_SECS {
        return Err(ClaimError::NotYetValid);
    }
    if now > envelope.exp + CLOCK_SKEW_SECS {
        return Err(ClaimError::Expired);
    }

    let body: serde_json::Value = serde_json::from_slice(&payload).map_err(|e| ClaimError::Malformed(e.to_string()))?;
    let claims = format.extract(&body)?;
    Ok(claims
        .into_iter()
        .map(|(claim_type, value)| VerifiedClaim {
            claim_type,
            value,
            issuer: envelope.iss.clone(),
            format: token.format.clone(),
        })
        .collect())
}
