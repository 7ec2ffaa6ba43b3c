use umax_core::vocab::formats;
use umax_core::{ClaimRequirement, Constraint, Scope, UsageRequirement, VerifiedClaim};

/// Policy actions are the UMA scopes.
pub type Action = Scope;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyDocument {
    pub(crate) uid: String,
    pub(crate) permissions: Vec<Rule>,
    pub(crate) prohibitions: Vec<Rule>,
}

impl PolicyDocument {
    pub fn uid(&self) -> &str {
        &self.uid
    }

    pub fn permissions(&self) -> &[Rule] {
        &self.permissions
    }

    pub fn prohibitions(&self) -> &[Rule] {
        &self.prohibitions
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub target: TargetMatcher,
    pub action: Action,
    pub assignee: PartyMatcher,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetMatcher {
    Resource(String),
    ResourceType(String),
    /// Always ends with `/`.
    ResourcePrefix(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartyMatcher {
    Anyone,
    WebId(String),
    Claim(ClaimMatcher),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClaimMatcher {
    pub claim_type: String,
    pub expected_value: String,
    pub accepted_formats: Vec<String>,
    pub trusted_issuer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AccessRequest {
    pub resource_id: String,
    pub resource_type: Option<String>,
    pub action: Action,
    pub purpose: Option<String>,
}

impl AccessRequest {
    pub fn new(resource_id: impl Into<String>, action: Action) -> Self {
        Self { resource_id: resource_id.into(), resource_type: None, action, purpose: None }
    }

    pub fn with_type(mut self, resource_type: impl Into<String>) -> Self {
        self.resource_type = Some(resource_type.into());
        self
    }

    pub fn with_purpose(mut self, purpose: impl Into<String>) -> Self {
        self.purpose = Some(purpose.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DenyReason {
    NoMatchingRule,
    Prohibited,
    ConstraintFailed,
}

impl DenyReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DenyReason::NoMatchingRule => "no-matching-rule",
            DenyReason::Prohibited => "prohibited",
            DenyReason::ConstraintFailed => "constraint-failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Grant {
        granted_action: Action,
        usage_requirements: Vec<UsageRequirement>,
    },
    Deny {
        reason: DenyReason,
    },
    /// Never empty.
    NeedClaims {
        required: Vec<ClaimRequirement>,
    },
}

impl Decision {
    pub fn is_grant(&self) -> bool {
        matches!(self, Decision::Grant { .. })
    }
}

impl TargetMatcher {
    pub(crate) fn matches(&self, request: &AccessRequest) -> bool {
        match self {
            TargetMatcher::Resource(r) => *r == request.resource_id,
            TargetMatcher::ResourceType(t) => request.resource_type.as_deref() == Some(t.as_str()),
            TargetMatcher::ResourcePrefix(p) => request.resource_id.starts_with(p.as_str()),
        }
    }
}

impl PartyMatcher {
    pub(crate) fn matches(&self, claims: &[VerifiedClaim]) -> bool {
        match self {
            PartyMatcher::Anyone => true,
            PartyMatcher::WebId(webid) => claims.iter().any(|c| c.claim_type == "webid" && c.value == *webid),
            PartyMatcher::Claim(m) => claims.iter().any(|c| {
                c.claim_type == m.claim_type
                    && c.value == m.expected_value
                    && c.issuer == m.trusted_issuer
                    && m.accepted_formats.contains(&c.format)
            }),
        }
    }

    /// What a requesting party has to push to satisfy this matcher. Discloses
    /// the claim kind and formats, never the expected WebID.
    pub(crate) fn requirement(&self) -> Option<ClaimRequirement> {
        match self {
            PartyMatcher::Anyone => None,
            PartyMatcher::WebId(_) => Some(ClaimRequirement {
                claim_type: "webid".into(),
                accepted_formats: vec![formats::OIDC_ID_TOKEN.into()],
                hint: None,
            }),
            PartyMatcher::Claim(m) => Some(ClaimRequirement {
                claim_type: format!("{}:{}", m.claim_type, m.expected_value),
                accepted_formats: m.accepted_formats.clone(),
                hint: None,
            }),
        }
    }
}

pub(crate) fn constraint_holds(
    constraint: &Constraint,
    request: &AccessRequest,
    now: chrono::DateTime<chrono::Utc>,
) -> bool {
    match constraint {
        Constraint::Window(w) => w.contains(now),
        Constraint::Purpose(p) => request.purpose.as_deref() == Some(p.as_str()),
    }
}
