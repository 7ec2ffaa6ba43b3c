//! Compact JWS with the `EdDSA` algorithm.

use serde::{Deserialize, Serialize};

use super::keys::{KeySetDocument, SigningKeyPair};
use super::{b64, unb64};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JwsError {
    #[error("malformed token: {0}")]
    Malformed(String),
    #[error("signature does not verify against the key set")]
    BadSignature,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JwsHeader {
    pub alg: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kid: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub typ: Option<String>,
}

pub fn sign_compact<T: Serialize>(payload: &T, key: &SigningKeyPair, typ: &str) -> String {
    let header = JwsHeader { alg: "EdDSA".into(), kid: Some(key.kid().to_owned()), typ: Some(typ.to_owned()) };
    let header = b64(&serde_json::to_vec(&header).expect("header serializes"));
    let payload = b64(&serde_json::to_vec(payload).expect("payload serializes"));
    let signing_input = format!("{header}.{payload}");
    let sig = b64(&key.sign(signing_input.as_bytes()));
    format!("{signing_input}.{sig}")
}

struct Parts<'a> {
    signing_input: &'a str,
    header: JwsHeader,
    payload: Vec<u8>,
    signature: Vec<u8>,
}

fn split(token: &str) -> Result<Parts<'_>, JwsError> {
    let mut it = token.split('.');
    let (Some(h), Some(p), Some(s), None) = (it.next(), it.next(), it.next(), it.next()) else {
        return Err(JwsError::Malformed("expected three dot-separated segments".into()));
    };
    let header_bytes = unb64(h).ok_or_else(|| JwsError::Malformed("header is not base64url".into()))?;
    let header: JwsHeader =
        serde_json::from_slice(&header_bytes).map_err(|e| JwsError::Malformed(format!("header: {e}")))?;
    if header.alg != "EdDSA" {
        return Err(JwsError::Malformed(format!("unsupported alg `{}`", header.alg)));
    }
    let payload = unb64(p).ok_or_else(|| JwsError::Malformed("payload is not base64url".into()))?;
    let signature = unb64(s).ok_or_else(|| JwsError::Malformed("signature is not base64url".into()))?;
    Ok(Parts { signing_input: &token[..h.len() + 1 + p.len()], header, payload, signature })
}

/// Header and payload bytes without checking the signature. Only for routing
/// decisions such as picking an issuer's key set.
pub fn decode_unverified(token: &str) -> Result<(JwsHeader, Vec<u8>), JwsError> {
    let parts = split(token)?;
    Ok((parts.header, parts.payload))
}

/// Verifies the signature against `keys` and returns the header and payload.
/// A `kid` in the header must name a key of the set; without one, every key
/// is tried.
pub fn verify_compact(token: &str, keys: &KeySetDocument) -> Result<(JwsHeader, Vec<u8>), JwsError> {
    let parts = split(token)?;
    let input = parts.signing_input.as_bytes();
    let ok = match &parts.header.kid {
        Some(kid) => keys.find(kid).is_some_and(|k| k.verify(input, &parts.signature)),
        None => keys.keys.iter().any(|k| k.verify(input, &parts.signature)),
    };
    if ok {
        Ok((parts.header, parts.payload))
    } else {
        Err(JwsError::BadSignature)
    }
}
