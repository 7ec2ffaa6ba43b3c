//! Vocabulary shared by the policy engine, the authorization server, the
//! resource server and clients.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// Claim token format identifiers understood by the suite.
pub mod formats {
    /// OpenID Connect ID token.
    pub const OIDC_ID_TOKEN: &str = "https://openid.net/specs/openid-connect-core-1_0.html#IDToken";
    /// Verifiable credential encoded as a signed compact token (suite-defined).
    pub const VC_JWT: &str = "urn:uma-suite:vc+jwt";
}

/// Access mode on a resource. Policy actions and UMA scopes share this
/// vocabulary one to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Read,
    Append,
    Write,
    Delete,
}

impl Scope {
    pub const ALL: [Scope; 4] = [Scope::Read, Scope::Append, Scope::Write, Scope::Delete];

    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Read => "read",
            Scope::Append => "append",
            Scope::Write => "write",
            Scope::Delete => "delete",
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown scope `{0}`")]
pub struct UnknownScope(pub String);

impl FromStr for Scope {
    type Err = UnknownScope;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "read" => Ok(Scope::Read),
            "append" => Ok(Scope::Append),
            "write" => Ok(Scope::Write),
            "delete" => Ok(Scope::Delete),
            other => Err(UnknownScope(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("temporal window must satisfy notBefore < notAfter ({not_before} >= {not_after})")]
pub struct InvalidWindow {
    pub not_before: DateTime<Utc>,
    pub not_after: DateTime<Utc>,
}

/// Half-open validity interval `[not_before, not_after)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawWindow", rename_all = "camelCase")]
pub struct TemporalWindow {
    not_before: DateTime<Utc>,
    not_after: DateTime<Utc>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawWindow {
    not_before: DateTime<Utc>,
    not_after: DateTime<Utc>,
}

impl TryFrom<RawWindow> for TemporalWindow {
    type Error = InvalidWindow;

    fn try_from(raw: RawWindow) -> Result<Self, Self::Error> {
        TemporalWindow::new(raw.not_before, raw.not_after)
    }
}

impl TemporalWindow {
    pub fn new(not_before: DateTime<Utc>, not_after: DateTime<Utc>) -> Result<Self, InvalidWindow> {
        if not_before < not_after {
            Ok(Self { not_before, not_after })
        } else {
            Err(InvalidWindow { not_before, not_after })
        }
    }

    pub fn not_before(&self) -> DateTime<Utc> {
        self.not_before
    }

    pub fn not_after(&self) -> DateTime<Utc> {
        self.not_after
    }

    pub fn contains(&self, instant: DateTime<Utc>) -> bool {
        self.not_before <= instant && instant < self.not_after
    }
}

/// A condition attached to a rule. Serialized as `{"window": {...}}` or
/// `{"purpose": "<iri>"}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub enum Constraint {
    Window(TemporalWindow),
    Purpose(String),
}

impl Constraint {
    pub fn kind(&self) -> UsageKind {
        match self {
            Constraint::Window(_) => UsageKind::Temporal,
            Constraint::Purpose(_) => UsageKind::Purpose,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UsageKind {
    Temporal,
    Purpose,
}

/// A usage-control requirement returned alongside an access grant: the
/// serialized constraint of a rule that granted access.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawUsage")]
pub struct UsageRequirement {
    kind: UsageKind,
    detail: Constraint,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUsage {
    kind: UsageKind,
    detail: Constraint,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("usage requirement kind {kind:?} does not match its detail")]
pub struct KindMismatch {
    kind: UsageKind,
}

impl TryFrom<RawUsage> for UsageRequirement {
    type Error = KindMismatch;

    fn try_from(raw: RawUsage) -> Result<Self, Self::Error> {
        if raw.detail.kind() == raw.kind {
            Ok(Self { kind: raw.kind, detail: raw.detail })
        } else {
            Err(KindMismatch { kind: raw.kind })
        }
    }
}

impl From<Constraint> for UsageRequirement {
    fn from(detail: Constraint) -> Self {
        Self { kind: detail.kind(), detail }
    }
}

impl UsageRequirement {
    pub fn kind(&self) -> UsageKind {
        self.kind
    }

    pub fn detail(&self) -> &Constraint {
        &self.detail
    }
}

/// A claim the requesting party still has to push.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClaimRequirement {
    pub claim_type: String,
    #[serde(rename = "claim_token_format")]
    pub accepted_formats: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
}

/// A claim extracted from a claim token whose signature and issuer were
/// verified.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VerifiedClaim {
    pub claim_type: String,
    pub value: String,
    pub issuer: String,
    pub format: String,
}

/// Pushed authentication material: a compact signed token plus its format
/// identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClaimToken {
    pub format: String,
    pub raw: String,
}

impl ClaimToken {
    pub fn new(format: impl Into<String>, raw: impl Into<String>) -> Self {
        Self { format: format.into(), raw: raw.into() }
    }
}
