//! The `profile-json` policy wire format.
//!
//! ```json
//! {
//!   "uid": "https://alice.example/policies/shoe-size",
//!   "permission": [{
//!     "target": {"resource": "https://pod.example/alice/profile/shoe-size"},
//!     "action": "read",
//!     "assignee": {"claim": {"type": "role", "value": "shoe-seller",
//!                            "formats": ["urn:uma-suite:vc+jwt"],
//!                            "issuer": "https://registry.example"}},
//!     "constraint": []
//!   }],
//!   "prohibition": []
//! }
//! ```

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use umax_core::{Constraint, Scope, TemporalWindow};

use crate::model::{ClaimMatcher, PartyMatcher, PolicyDocument, Rule, TargetMatcher};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PolicyFormat {
    #[default]
    ProfileJson,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("malformed policy document: {0}")]
    Malformed(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("invalid matcher: {0}")]
    InvalidMatcher(String),
    #[error("invalid temporal window: {0}")]
    InvalidWindow(String),
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Policy { path: PathBuf, source: PolicyError },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    uid: String,
    #[serde(default)]
    permission: Vec<RawRule>,
    #[serde(default)]
    prohibition: Vec<RawRule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    target: RawTarget,
    action: String,
    assignee: RawAssignee,
    #[serde(default)]
    constraint: Vec<RawConstraint>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct RawTarget {
    resource: Option<String>,
    resource_type: Option<String>,
    resource_prefix: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAssignee {
    anyone: Option<bool>,
    webid: Option<String>,
    claim: Option<RawClaim>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawClaim {
    #[serde(rename = "type")]
    claim_type: String,
    value: String,
    formats: Vec<String>,
    issuer: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraint {
    window: Option<RawWindow>,
    purpose: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct RawWindow {
    not_before: String,
    not_after: String,
}

fn absolute_iri(value: &str, what: &str) -> Result<String, PolicyError> {
    match url::Url::parse(value) {
        Ok(_) => Ok(value.to_owned()),
        Err(_) => Err(PolicyError::Malformed(format!("{what} `{value}` is not an absolute IRI"))),
    }
}

fn instant(value: &str) -> Result<DateTime<Utc>, PolicyError> {
    DateTime::parse_from_rfc3339(value)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| PolicyError::Malformed(format!("`{value}` is not an RFC 3339 instant: {e}")))
}

fn target(raw: RawTarget) -> Result<TargetMatcher, PolicyError> {
    match (raw.resource, raw.resource_type, raw.resource_prefix) {
        (Some(r), None, None) => Ok(TargetMatcher::Resource(absolute_iri(&r, "target resource")?)),
        (None, Some(t), None) => Ok(TargetMatcher::ResourceType(absolute_iri(&t, "target resourceType")?)),
        (None, None, Some(p)) => {
            if !p.ends_with('/') {
                return Err(PolicyError::InvalidMatcher(format!("resourcePrefix `{p}` must end with `/`")));
            }
            Ok(TargetMatcher::ResourcePrefix(absolute_iri(&p, "target resourcePrefix")?))
        }
        _ => Err(PolicyError::InvalidMatcher(
            "target needs exactly one of resource, resourceType, resourcePrefix".into(),
        )),
    }
}

fn assignee(raw: RawAssignee) -> Result<PartyMatcher, PolicyError> {
    match (raw.anyone, raw.webid, raw.claim) {
        (Some(true), None, None) => Ok(PartyMatcher::Anyone),
        (Some(false), None, None) => Err(PolicyError::InvalidMatcher("`anyone` must be true".into())),
        (None, Some(w), None) => Ok(PartyMatcher::WebId(absolute_iri(&w, "webid")?)),
        (None, None, Some(c)) => {
            if c.formats.is_empty() {
                return Err(PolicyError::InvalidMatcher("claim matcher needs at least one format".into()));
            }
            if c.claim_type.is_empty() || c.value.is_empty() {
                return Err(PolicyError::InvalidMatcher("claim type and value must be non-empty".into()));
            }
            Ok(PartyMatcher::Claim(ClaimMatcher {
                claim_type: c.claim_type,
                expected_value: c.value,
                accepted_formats: c.formats,
                trusted_issuer: absolute_iri(&c.issuer, "claim issuer")?,
            }))
        }
        _ => Err(PolicyError::InvalidMatcher("assignee needs exactly one of anyone, webid, claim".into())),
    }
}

fn constraint(raw: RawConstraint) -> Result<Constraint, PolicyError> {
    match (raw.window, raw.purpose) {
        (Some(w), None) => {
            let (nb, na) = (instant(&w.not_before)?, instant(&w.not_after)?);
            TemporalWindow::new(nb, na).map(Constraint::Window).map_err(|e| PolicyError::InvalidWindow(e.to_string()))
        }
        (None, Some(p)) => Ok(Constraint::Purpose(absolute_iri(&p, "purpose")?)),
        _ => Err(PolicyError::Malformed("constraint needs exactly one of window, purpose".into())),
    }
}

fn rule(raw: RawRule) -> Result<Rule, PolicyError> {
    let action = raw.action.parse::<Scope>().map_err(|_| PolicyError::UnknownAction(raw.action.clone()))?;
    Ok(Rule {
        target: target(raw.target)?,
        action,
        assignee: assignee(raw.assignee)?,
        constraints: raw.constraint.into_iter().map(constraint).collect::<Result<_, _>>()?,
    })
}

impl PolicyDocument {
    pub fn new(uid: impl Into<String>, permissions: Vec<Rule>, prohibitions: Vec<Rule>) -> Result<Self, PolicyError> {
        let uid = uid.into();
        if uid.is_empty() {
            return Err(PolicyError::Malformed("uid is empty".into()));
        }
        absolute_iri(&uid, "uid")?;
        if permissions.is_empty() && prohibitions.is_empty() {
            return Err(PolicyError::Malformed("policy has no rules".into()));
        }
        for r in permissions.iter().chain(&prohibitions) {
            if let TargetMatcher::ResourcePrefix(p) = &r.target {
                if !p.ends_with('/') {
                    return Err(PolicyError::InvalidMatcher(format!("resourcePrefix `{p}` must end with `/`")));
                }
            }
        }
        Ok(Self { uid, permissions, prohibitions })
    }
}

pub fn parse_policy(document: &[u8], format: PolicyFormat) -> Result<PolicyDocument, PolicyError> {
    match format {
        PolicyFormat::ProfileJson => {
            let raw: RawPolicy = serde_json::from_slice(document).map_err(|e| PolicyError::Malformed(e.to_string()))?;
            let permissions = raw.permission.into_iter().map(rule).collect::<Result<_, _>>()?;
            let prohibitions = raw.prohibition.into_iter().map(rule).collect::<Result<_, _>>()?;
            PolicyDocument::new(raw.uid, permissions, prohibitions)
        }
    }
}

fn rule_json(rule: &Rule) -> Value {
    let target = match &rule.target {
        TargetMatcher::Resource(r) => json!({"resource": r}),
        TargetMatcher::ResourceType(t) => json!({"resourceType": t}),
        TargetMatcher::ResourcePrefix(p) => json!({"resourcePrefix": p}),
    };
    let assignee = match &rule.assignee {
        PartyMatcher::Anyone => json!({"anyone": true}),
        PartyMatcher::WebId(w) => json!({"webid": w}),
        PartyMatcher::Claim(c) => json!({"claim": RawClaim {
            claim_type: c.claim_type.clone(),
            value: c.expected_value.clone(),
            formats: c.accepted_formats.clone(),
            issuer: c.trusted_issuer.clone(),
        }}),
    };
    json!({
        "target": target,
        "action": rule.action,
        "assignee": assignee,
        "constraint": rule.constraints,
    })
}

/// Serializes a policy back into `profile-json`.
pub fn to_profile_json(policy: &PolicyDocument) -> Value {
    json!({
        "uid": policy.uid,
        "permission": policy.permissions.iter().map(rule_json).collect::<Vec<_>>(),
        "prohibition": policy.prohibitions.iter().map(rule_json).collect::<Vec<_>>(),
    })
}

/// Loads every `*.policy.json` file of `dir`, in file-name order.
pub fn load_policy_dir(dir: &Path) -> Result<Vec<PolicyDocument>, LoadError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| LoadError::Io { path, source }
    };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(".policy.json")))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let bytes = std::fs::read(&path).map_err(io(&path))?;
            parse_policy(&bytes, PolicyFormat::ProfileJson).map_err(|source| LoadError::Policy { path, source })
        })
        .collect()
}
