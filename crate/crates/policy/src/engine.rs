use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use umax_core::{UsageRequirement, VerifiedClaim};

use crate::model::{constraint_holds, AccessRequest, Action, Decision, DenyReason, PolicyDocument, Rule};

pub fn evaluate(
    request: &AccessRequest,
    claims: &[VerifiedClaim],
    policies: &[PolicyDocument],
    now: DateTime<Utc>,
) -> Decision {
    let applicable = |rule: &&Rule| rule.action == request.action && rule.target.matches(request);
    let constraints_hold = |rule: &Rule| rule.constraints.iter().all(|c| constraint_holds(c, request, now));

    let prohibitions = policies.iter().flat_map(|p| p.prohibitions.iter()).filter(applicable);
    if prohibitions.into_iter().any(|r| r.assignee.matches(claims) && constraints_hold(r)) {
        return Decision::Deny { reason: DenyReason::Prohibited };
    }

    let permissions: Vec<&Rule> = policies.iter().flat_map(|p| p.permissions.iter()).filter(applicable).collect();
    if permissions.is_empty() {
        return Decision::Deny { reason: DenyReason::NoMatchingRule };
    }

    let (held, blocked): (Vec<&Rule>, Vec<&Rule>) =
        permissions.into_iter().filter(|r| constraints_hold(r)).partition(|r| r.assignee.matches(claims));

    if !held.is_empty() {
        let usage: BTreeSet<UsageRequirement> =
            held.iter().flat_map(|r| r.constraints.iter().cloned().map(UsageRequirement::from)).collect();
        return Decision::Grant { granted_action: request.action, usage_requirements: usage.into_iter().collect() };
    }

    let required: BTreeSet<_> = blocked.iter().filter_map(|r| r.assignee.requirement()).collect();
    if required.is_empty() {
        Decision::Deny { reason: DenyReason::ConstraintFailed }
    } else {
        Decision::NeedClaims { required: required.into_iter().collect() }
    }
}

/// Whether an anonymous party (no claims, no purpose) is granted `action`.
pub fn is_public(
    resource_id: &str,
    resource_type: Option<&str>,
    action: Action,
    policies: &[PolicyDocument],
    now: DateTime<Utc>,
) -> bool {
    let request = AccessRequest {
        resource_id: resource_id.to_owned(),
        resource_type: resource_type.map(str::to_owned),
        action,
        purpose: None,
    };
    evaluate(&request, &[], policies, now).is_grant()
}
