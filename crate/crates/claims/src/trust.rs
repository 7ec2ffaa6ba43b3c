use http::{Method, StatusCode};
use serde::Deserialize;
use umax_core::net::{empty_request, parse_json};
use umax_core::security::KeySetDocument;
use umax_core::Transport;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeySource {
    Inline(KeySetDocument),
    /// Must be resolved with [`resolve_trust`] before use.
    Uri(String),
}

/// An issuer whose claim tokens are accepted. Deserializes from
/// `{"issuer": ..., "jwks": {...}}` or `{"issuer": ..., "jwks_uri": ...}`.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(try_from = "RawTrustedIssuer")]
pub struct TrustedIssuer {
    pub issuer: String,
    pub keys: KeySource,
}

impl TrustedIssuer {
    pub fn inline(issuer: impl Into<String>, keys: KeySetDocument) -> Self {
        Self { issuer: issuer.into(), keys: KeySource::Inline(keys) }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrustedIssuer {
    issuer: String,
    jwks: Option<KeySetDocument>,
    jwks_uri: Option<String>,
}

impl TryFrom<RawTrustedIssuer> for TrustedIssuer {
    type Error = String;

    fn try_from(raw: RawTrustedIssuer) -> Result<Self, Self::Error> {
        let keys = match (raw.jwks, raw.jwks_uri) {
            (Some(k), None) => KeySource::Inline(k),
            (None, Some(u)) => KeySource::Uri(u),
            _ => return Err(format!("issuer `{}` needs exactly one of jwks, jwks_uri", raw.issuer)),
        };
        Ok(Self { issuer: raw.issuer, keys })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TrustError {
    #[error("issuer `{0}` is configured twice")]
    Duplicate(String),
    #[error("cannot fetch key set for `{issuer}`: {reason}")]
    Fetch { issuer: String, reason: String },
}

/// Checks issuer uniqueness and replaces every [`KeySource::Uri`] with the
/// fetched key set.
pub fn resolve_trust(trust: Vec<TrustedIssuer>, transport: &dyn Transport) -> Result<Vec<TrustedIssuer>, TrustError> {
    let mut out: Vec<TrustedIssuer> = Vec::with_capacity(trust.len());
    for entry in trust {
        if out.iter().any(|t| t.issuer == entry.issuer) {
            return Err(TrustError::Duplicate(entry.issuer));
        }
        let keys = match entry.keys {
            KeySource::Inline(k) => k,
            KeySource::Uri(uri) => {
                let fail = |reason: String| TrustError::Fetch { issuer: entry.issuer.clone(), reason };
                let resp = transport.send(empty_request(Method::GET, &uri)).map_err(|e| fail(e.to_string()))?;
                if resp.status() != StatusCode::OK {
                    return Err(fail(format!("status {}", resp.status())));
                }
                parse_json(resp.body()).map_err(|e| fail(e.to_string()))?
            }
        };
        out.push(TrustedIssuer::inline(entry.issuer, keys));
    }
    Ok(out)
}
