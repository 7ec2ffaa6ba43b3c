use std::collections::BTreeMap;

use chrono::Duration;
use serde::Deserialize;
use umax_core::security::KeySetDocument;

#[derive(Debug, Clone)]
pub struct AsSettings {
    /// Origin the server is reachable at; every endpoint lives under it.
    pub issuer: String,
    pub ticket_ttl: Duration,
    pub token_ttl: Duration,
    /// Maximum number of `need_info` responses in one negotiation.
    pub max_rounds: u32,
}

impl AsSettings {
    pub fn new(issuer: impl Into<String>) -> Self {
        Self {
            issuer: issuer.into().trim_end_matches('/').to_owned(),
            ticket_ttl: Duration::seconds(300),
            token_ttl: Duration::seconds(600),
            max_rounds: 5,
        }
    }
}

/// Where to find a resource server's published keys.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum RsKeySource {
    Uri(String),
    Inline(KeySetDocument),
}

/// Resource servers allowed to call the protection endpoints, keyed by
/// origin. The file form is a JSON object mapping each origin to either its
/// key-set URI or an inline key set.
pub type RsAllowlist = BTreeMap<String, RsKeySource>;
