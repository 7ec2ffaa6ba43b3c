use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::Value;
use umax_core::vocab::formats;

use crate::ClaimError;

pub(crate) trait ClaimFormat: Sync {
    fn uri(&self) -> &'static str;

    /// `(claim type, value)` pairs carried by an already-verified payload.
    fn extract(&self, payload: &Value) -> Result<Vec<(String, String)>, ClaimError>;
}

pub(crate) static ALL: [&dyn ClaimFormat; 2] = [&OidcIdToken, &VcToken];

pub(crate) struct OidcIdToken;

#[derive(Deserialize)]
struct IdTokenBody {
    #[serde(default)]
    sub: Option<String>,
    #[serde(default)]
    webid: Option<String>,
}

impl ClaimFormat for OidcIdToken {
    fn uri(&self) -> &'static str {
        formats::OIDC_ID_TOKEN
    }

    fn extract(&self, payload: &Value) -> Result<Vec<(String, String)>, ClaimError> {
        let body = IdTokenBody::deserialize(payload).map_err(|e| ClaimError::Malformed(e.to_string()))?;
        let webid = body.webid.or(body.sub).filter(|s| !s.is_empty()).ok_or(ClaimError::MissingSubject)?;
        Ok(vec![("webid".into(), webid)])
    }
}

pub(crate) struct VcToken;

#[derive(Deserialize)]
struct VcBody {
    #[serde(default)]
    sub: Option<String>,
    claims: BTreeMap<String, String>,
}

impl ClaimFormat for VcToken {
    fn uri(&self) -> &'static str {
        formats::VC_JWT
    }

    fn extract(&self, payload: &Value) -> Result<Vec<(String, String)>, ClaimError> {
        let body = VcBody::deserialize(payload).map_err(|e| ClaimError::Malformed(e.to_string()))?;
        if body.sub.as_deref().is_none_or(str::is_empty) {
            return Err(ClaimError::MissingSubject);
        }
        Ok(body.claims.into_iter().filter(|(k, v)| !k.is_empty() && !v.is_empty()).collect())
    }
}
