//! HTTP message signatures (RFC 9421) with a content digest (RFC 9530),
//! restricted to one fixed profile:
//!
//! * label `sig1`, algorithm `ed25519`
//! * covered components `"@method" "@target-uri" "content-digest"`
//! * parameters `created` and `keyid`
//!
//! Verification accepts a message only when `|clock - created| <= 120 s`.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use chrono::{DateTime, Utc};
use http::HeaderValue;

use super::keys::{KeySetDocument, SigningKeyPair};
use crate::net::{header_str, HttpRequest};

pub const SIGNATURE_LABEL: &str = "sig1";
pub const COVERED_COMPONENTS: [&str; 3] = ["@method", "@target-uri", "content-digest"];
pub const MAX_SKEW_SECS: i64 = 120;

/// Public key sets of every party allowed to call, keyed by origin.
pub type KeyAllowlist = BTreeMap<String, KeySetDocument>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SignatureError {
    #[error("request carries no signature")]
    NoSignature,
    #[error("malformed signature metadata: {0}")]
    Malformed(String),
    #[error("no allow-listed party publishes key `{0}`")]
    UnknownKey(String),
    #[error("signature does not verify")]
    BadSignature,
    #[error("signature created at {created} is outside the freshness window")]
    Stale { created: i64 },
    #[error("content-digest does not match the body")]
    DigestMismatch,
}

pub fn content_digest(body: &[u8]) -> String {
    let digest = ring::digest::digest(&ring::digest::SHA256, body);
    format!("sha-256=:{}:", STANDARD.encode(digest.as_ref()))
}

fn signature_params(created: i64, keyid: &str) -> String {
    let comps: Vec<String> = COVERED_COMPONENTS.iter().map(|c| format!("\"{c}\"")).collect();
    format!("({});created={created};keyid=\"{keyid}\";alg=\"ed25519\"", comps.join(" "))
}

fn signature_base(method: &str, target_uri: &str, digest: &str, params: &str) -> String {
    format!(
        "\"@method\": {method}\n\"@target-uri\": {target_uri}\n\"content-digest\": {digest}\n\"@signature-params\": {params}"
    )
}

/// Adds `Content-Digest`, `Signature-Input` and `Signature` headers. The
/// request URI must be absolute.
pub fn sign_http_message(request: &mut HttpRequest, key: &SigningKeyPair, created: DateTime<Utc>) {
    let digest = content_digest(request.body());
    let params = signature_params(created.timestamp(), key.kid());
    let base = signature_base(request.method().as_str(), &request.uri().to_string(), &digest, &params);
    let sig = STANDARD.encode(key.sign(base.as_bytes()));
    let headers = request.headers_mut();
    headers.insert("content-digest", HeaderValue::from_str(&digest).expect("ascii digest"));
    headers.insert(
        "signature-input",
        HeaderValue::from_str(&format!("{SIGNATURE_LABEL}={params}")).expect("ascii params"),
    );
    headers.insert("signature", HeaderValue::from_str(&format!("{SIGNATURE_LABEL}=:{sig}:")).expect("ascii sig"));
}

struct SignatureInput {
    created: i64,
    keyid: String,
}

fn parse_signature_input(value: &str) -> Result<SignatureInput, SignatureError> {
    let malformed = |m: &str| SignatureError::Malformed(m.to_owned());
    let rest = value
        .strip_prefix(SIGNATURE_LABEL)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| malformed("expected label sig1"))?;
    let rest = rest.strip_prefix('(').ok_or_else(|| malformed("component list must open with `(`"))?;
    let (list, params) = rest.split_once(')').ok_or_else(|| malformed("unterminated component list"))?;
    let comps: Vec<&str> = list.split_whitespace().map(|c| c.trim_matches('"')).collect();
    if comps != COVERED_COMPONENTS {
        return Err(malformed("covered components differ from the fixed profile"));
    }
    let mut created = None;
    let mut keyid = None;
    let mut alg = None;
    for param in params.split(';').filter(|p| !p.is_empty()) {
        let (k, v) = param.split_once('=').ok_or_else(|| malformed("parameter without value"))?;
        match k {
            "created" => created = Some(v.parse::<i64>().map_err(|_| malformed("created is not an integer"))?),
            "keyid" => keyid = Some(v.trim_matches('"').to_owned()),
            "alg" => alg = Some(v.trim_matches('"').to_owned()),
            _ => return Err(malformed("unexpected signature parameter")),
        }
    }
    if alg.as_deref().is_some_and(|a| a != "ed25519") {
        return Err(malformed("unsupported alg"));
    }
    Ok(SignatureInput {
        created: created.ok_or_else(|| malformed("missing created"))?,
        keyid: keyid.ok_or_else(|| malformed("missing keyid"))?,
    })
}

fn parse_signature(value: &str) -> Result<Vec<u8>, SignatureError> {
    value
        .strip_prefix(SIGNATURE_LABEL)
        .and_then(|r| r.strip_prefix("=:"))
        .and_then(|r| r.strip_suffix(':'))
        .and_then(|b| STANDARD.decode(b).ok())
        .ok_or_else(|| SignatureError::Malformed("signature is not a sig1 byte sequence".into()))
}

/// Returns the origin whose published key produced a valid, fresh signature
/// over the request, with a content digest matching the body.
pub fn verify_http_message(
    request: &HttpRequest,
    allowlist: &KeyAllowlist,
    clock: DateTime<Utc>,
) -> Result<String, SignatureError> {
    let headers = request.headers();
    let (Some(input), Some(sig)) = (header_str(headers, "signature-input"), header_str(headers, "signature")) else {
        return Err(SignatureError::NoSignature);
    };
    let digest = header_str(headers, "content-digest").ok_or(SignatureError::NoSignature)?;
    let input = parse_signature_input(input)?;
    let sig = parse_signature(sig)?;

    let candidates: Vec<(&String, _)> =
        allowlist.iter().filter_map(|(origin, set)| set.find(&input.keyid).map(|k| (origin, k))).collect();
    if candidates.is_empty() {
        return Err(SignatureError::UnknownKey(input.keyid));
    }
    let params = signature_params(input.created, &input.keyid);
    let base = signature_base(request.method().as_str(), &request.uri().to_string(), digest, &params);
    let origin = candidates
        .into_iter()
        .find(|(_, key)| key.verify(base.as_bytes(), &sig))
        .map(|(origin, _)| origin.clone())
        .ok_or(SignatureError::BadSignature)?;

    if (clock.timestamp() - input.created).abs() > MAX_SKEW_SECS {
        return Err(SignatureError::Stale { created: input.created });
    }
    if content_digest(request.body()) != digest {
        return Err(SignatureError::DigestMismatch);
    }
    Ok(origin)
}
