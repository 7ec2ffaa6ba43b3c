//! Minting claim tokens, for test identity providers and credential issuers.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, Utc};
use serde::Serialize;
use umax_core::security::jws;
use umax_core::security::SigningKeyPair;
use umax_core::vocab::formats;
use umax_core::ClaimToken;

#[derive(Serialize)]
struct IdTokenBody<'a> {
    iss: &'a str,
    sub: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    webid: Option<&'a str>,
    iat: i64,
    exp: i64,
}

#[derive(Serialize)]
struct VcBody<'a> {
    iss: &'a str,
    sub: &'a str,
    iat: i64,
    exp: i64,
    claims: &'a BTreeMap<String, String>,
}

pub fn id_token(
    key: &SigningKeyPair,
    issuer: &str,
    sub: &str,
    webid: Option<&str>,
    issued_at: DateTime<Utc>,
    lifetime: Duration,
) -> ClaimToken {
    let body =
        IdTokenBody { iss: issuer, sub, webid, iat: issued_at.timestamp(), exp: (issued_at + lifetime).timestamp() };
    ClaimToken::new(formats::OIDC_ID_TOKEN, jws::sign_compact(&body, key, "JWT"))
}

pub fn vc_token(
    key: &SigningKeyPair,
    issuer: &str,
    sub: &str,
    claims: &BTreeMap<String, String>,
    issued_at: DateTime<Utc>,
    lifetime: Duration,
) -> ClaimToken {
    let body = VcBody { iss: issuer, sub, iat: issued_at.timestamp(), exp: (issued_at + lifetime).timestamp(), claims };
    ClaimToken::new(formats::VC_JWT, jws::sign_compact(&body, key, "vc+jwt"))
}
