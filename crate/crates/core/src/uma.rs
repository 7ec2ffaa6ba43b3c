//! UMA wire documents exchanged between clients, resource servers and the
//! authorization server.

use serde::{Deserialize, Serialize};

use crate::vocab::{ClaimRequirement, Scope, UsageRequirement};

pub const UMA_TICKET_GRANT: &str = "urn:ietf:params:oauth:grant-type:uma-ticket";
pub const UMA_CONFIGURATION_PATH: &str = "/.well-known/uma2-configuration";
pub const JWKS_PATH: &str = "/.well-known/jwks.json";
pub const REGISTRATION_PATH: &str = "/rreg/";
pub const PERMISSION_PATH: &str = "/perm";
pub const TOKEN_PATH: &str = "/token";
pub const INTROSPECTION_PATH: &str = "/introspect";

/// Header a creating client uses to declare the type of a new resource.
pub const RESOURCE_TYPE_HEADER: &str = "x-resource-type";

/// Discovery document served at [`UMA_CONFIGURATION_PATH`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsConfiguration {
    pub issuer: String,
    pub token_endpoint: String,
    pub permission_endpoint: String,
    pub resource_registration_endpoint: String,
    pub introspection_endpoint: String,
    pub jwks_uri: String,
}

impl AsConfiguration {
    pub fn for_issuer(issuer: &str) -> Self {
        let base = issuer.trim_end_matches('/');
        Self {
            issuer: base.to_owned(),
            token_endpoint: format!("{base}{TOKEN_PATH}"),
            permission_endpoint: format!("{base}{PERMISSION_PATH}"),
            resource_registration_endpoint: format!("{base}{REGISTRATION_PATH}"),
            introspection_endpoint: format!("{base}{INTROSPECTION_PATH}"),
            jwks_uri: format!("{base}{JWKS_PATH}"),
        }
    }
}

/// Resource description sent to (and returned by) the registration endpoint.
/// Unknown members are ignored; in particular the registering origin is
/// never taken from the body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceDescription {
    pub resource_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, rename = "type", skip_serializing_if = "Option::is_none")]
    pub resource_type: Option<String>,
    pub resource_scopes: Vec<Scope>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistrationCreated {
    #[serde(rename = "_id")]
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PermissionRequest {
    pub resource_id: String,
    pub resource_scopes: Vec<Scope>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TicketIssued {
    pub ticket: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicHint {
    pub public_scopes: Vec<Scope>,
}

/// One granted (resource, scopes) entry, as carried in grants and tokens.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ResourcePermission {
    pub resource_id: String,
    pub resource_scopes: Vec<Scope>,
}

impl ResourcePermission {
    pub fn covers(&self, resource_id: &str, scope: Scope) -> bool {
        self.resource_id == resource_id && self.resource_scopes.contains(&scope)
    }
}

/// Successful token endpoint response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrantBody {
    pub access_token: String,
    pub token_type: String,
    pub expires_in: i64,
    pub permissions: Vec<ResourcePermission>,
    pub usage_requirements: Vec<UsageRequirement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeedInfoBody {
    pub error: String,
    pub ticket: String,
    pub required_claims: Vec<ClaimRequirement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_description: Option<String>,
}

impl ErrorBody {
    pub fn new(error: &str, description: impl Into<Option<String>>) -> Self {
        Self { error: error.to_owned(), error_description: description.into() }
    }
}

/// Ticketless request entry, carried JSON-encoded in the `permissions` form
/// field of a token request. Exactly one of `resource_id` and
/// `resource_type` must be set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PermissionDescriptor {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource_type: Option<String>,
    pub resource_scopes: Vec<Scope>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purpose: Option<String>,
}

impl PermissionDescriptor {
    pub fn for_resource(resource_id: impl Into<String>, scopes: Vec<Scope>) -> Self {
        Self { resource_id: Some(resource_id.into()), resource_type: None, resource_scopes: scopes, purpose: None }
    }

    pub fn for_type(resource_type: impl Into<String>, scopes: Vec<Scope>) -> Self {
        Self { resource_id: None, resource_type: Some(resource_type.into()), resource_scopes: scopes, purpose: None }
    }

    pub fn with_purpose(mut self, purpose: impl Into<String>) -> Self {
        self.purpose = Some(purpose.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntrospectionBody {
    pub active: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permissions: Option<Vec<ResourcePermission>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iat: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exp: Option<i64>,
}

/// The `WWW-Authenticate: UMA ...` challenge a resource server emits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UmaChallenge {
    pub realm: String,
    pub as_uri: String,
    pub ticket: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed UMA challenge: {0}")]
pub struct ChallengeError(pub String);

impl UmaChallenge {
    pub fn to_header_value(&self) -> String {
        let mut out = format!("UMA realm=\"{}\", as_uri=\"{}\"", self.realm, self.as_uri);
        if let Some(ticket) = &self.ticket {
            out.push_str(&format!(", ticket=\"{ticket}\""));
        }
        out
    }

    pub fn parse(value: &str) -> Result<Self, ChallengeError> {
        let rest = value.trim().strip_prefix("UMA ").ok_or_else(|| ChallengeError("scheme is not UMA".into()))?;
        let mut realm = None;
        let mut as_uri = None;
        let mut ticket = None;
        for (key, val) in parse_auth_params(rest)? {
            match key.as_str() {
                "realm" => realm = Some(val),
                "as_uri" => as_uri = Some(val),
                "ticket" => ticket = Some(val),
                _ => {}
            }
        }
        Ok(Self {
            realm: realm.ok_or_else(|| ChallengeError("missing realm".into()))?,
            as_uri: as_uri.ok_or_else(|| ChallengeError("missing as_uri".into()))?,
            ticket,
        })
    }
}

fn parse_auth_params(input: &str) -> Result<Vec<(String, String)>, ChallengeError> {
    let mut params = Vec::new();
    let mut chars = input.chars().peekable();
    loop {
        while matches!(chars.peek(), Some(c) if c.is_whitespace() || *c == ',') {
            chars.next();
        }
        if chars.peek().is_none() {
            break;
        }
        let key: String = std::iter::from_fn(|| chars.next_if(|c| *c != '=' && !c.is_whitespace())).collect();
        if chars.next() != Some('=') {
            return Err(ChallengeError(format!("parameter `{key}` has no value")));
        }
        let value = if chars.peek() == Some(&'"') {
            chars.next();
            let mut v = String::new();
            loop {
                match chars.next() {
                    Some('"') => break,
                    Some('\\') => v.extend(chars.next()),
                    Some(c) => v.push(c),
                    None => return Err(ChallengeError("unterminated quoted string".into())),
                }
            }
            v
        } else {
            std::iter::from_fn(|| chars.next_if(|c| *c != ',' && !c.is_whitespace())).collect()
        };
        params.push((key, value));
    }
    Ok(params)
}
