//! Reference evaluator and random instance generators.
//!
//! [`brute_force_evaluate`] re-derives every decision by enumerating
//! (rule, request) pairs with plain loops, sharing nothing with the engine
//! beyond the data model. Property tests compare the two.

use chrono::{DateTime, Duration, Utc};
use proptest::prelude::*;
use umax_core::vocab::formats;
use umax_core::{ClaimRequirement, Constraint, Scope, TemporalWindow, UsageRequirement, VerifiedClaim};

use crate::model::{
    AccessRequest, ClaimMatcher, Decision, DenyReason, PartyMatcher, PolicyDocument, Rule, TargetMatcher,
};

#[derive(Clone, Copy, PartialEq)]
enum Outcome {
    TargetMiss,
    Satisfied,
    ConstraintFails,
    AssigneeOnlyFails,
}

fn target_hits(target: &TargetMatcher, request: &AccessRequest) -> bool {
    match target {
        TargetMatcher::Resource(r) => r.as_str() == request.resource_id.as_str(),
        TargetMatcher::ResourceType(t) => match &request.resource_type {
            Some(rt) => rt == t,
            None => false,
        },
        TargetMatcher::ResourcePrefix(p) => {
            request.resource_id.len() >= p.len() && request.resource_id.as_bytes()[..p.len()] == *p.as_bytes()
        }
    }
}

fn assignee_hits(assignee: &PartyMatcher, claims: &[VerifiedClaim]) -> bool {
    match assignee {
        PartyMatcher::Anyone => true,
        PartyMatcher::WebId(w) => {
            let mut found = false;
            for c in claims {
                if c.claim_type == "webid" && &c.value == w {
                    found = true;
                }
            }
            found
        }
        PartyMatcher::Claim(m) => {
            let mut found = false;
            for c in claims {
                let mut format_ok = false;
                for f in &m.accepted_formats {
                    if *f == c.format {
                        format_ok = true;
                    }
                }
                if format_ok
                    && c.claim_type == m.claim_type
                    && c.value == m.expected_value
                    && c.issuer == m.trusted_issuer
                {
                    found = true;
                }
            }
            found
        }
    }
}

fn constraint_ok(constraint: &Constraint, request: &AccessRequest, now: DateTime<Utc>) -> bool {
    match constraint {
        Constraint::Window(w) => {
            let t = now.timestamp_nanos_opt().unwrap();
            w.not_before().timestamp_nanos_opt().unwrap() <= t && t < w.not_after().timestamp_nanos_opt().unwrap()
        }
        Constraint::Purpose(p) => matches!(&request.purpose, Some(q) if q == p),
    }
}

fn classify(rule: &Rule, request: &AccessRequest, claims: &[VerifiedClaim], now: DateTime<Utc>) -> Outcome {
    if rule.action != request.action || !target_hits(&rule.target, request) {
        return Outcome::TargetMiss;
    }
    let mut all_constraints = true;
    for c in &rule.constraints {
        if !constraint_ok(c, request, now) {
            all_constraints = false;
        }
    }
    let assignee = assignee_hits(&rule.assignee, claims);
    match (all_constraints, assignee) {
        (true, true) => Outcome::Satisfied,
        (true, false) => Outcome::AssigneeOnlyFails,
        (false, _) => Outcome::ConstraintFails,
    }
}

fn requirement_for(assignee: &PartyMatcher) -> Option<ClaimRequirement> {
    match assignee {
        PartyMatcher::Anyone => None,
        PartyMatcher::WebId(_) => Some(ClaimRequirement {
            claim_type: String::from("webid"),
            accepted_formats: vec![formats::OIDC_ID_TOKEN.to_string()],
            hint: None,
        }),
        PartyMatcher::Claim(m) => Some(ClaimRequirement {
            claim_type: m.claim_type.clone() + ":" + &m.expected_value,
            accepted_formats: m.accepted_formats.clone(),
            hint: None,
        }),
    }
}

fn push_unique<T: PartialEq>(list: &mut Vec<T>, item: T) {
    if !list.contains(&item) {
        list.push(item);
    }
}

/// Literal step-by-step decision procedure.
pub fn brute_force_evaluate(
    request: &AccessRequest,
    claims: &[VerifiedClaim],
    policies: &[PolicyDocument],
    now: DateTime<Utc>,
) -> Decision {
    let mut prohibited = false;
    let mut any_permission_applicable = false;
    let mut granting_usage: Vec<UsageRequirement> = Vec::new();
    let mut granted = false;
    let mut missing: Vec<ClaimRequirement> = Vec::new();

    for policy in policies {
        for rule in policy.prohibitions() {
            if classify(rule, request, claims, now) == Outcome::Satisfied {
                prohibited = true;
            }
        }
    }
    for policy in policies {
        for rule in policy.permissions() {
            match classify(rule, request, claims, now) {
                Outcome::TargetMiss => {}
                Outcome::Satisfied => {
                    any_permission_applicable = true;
                    granted = true;
                    for c in &rule.constraints {
                        push_unique(&mut granting_usage, UsageRequirement::from(c.clone()));
                    }
                }
                Outcome::ConstraintFails => any_permission_applicable = true,
                Outcome::AssigneeOnlyFails => {
                    any_permission_applicable = true;
                    if let Some(req) = requirement_for(&rule.assignee) {
                        push_unique(&mut missing, req);
                    }
                }
            }
        }
    }

    if prohibited {
        Decision::Deny { reason: DenyReason::Prohibited }
    } else if granted {
        granting_usage.sort();
        Decision::Grant { granted_action: request.action, usage_requirements: granting_usage }
    } else if !missing.is_empty() {
        missing.sort();
        Decision::NeedClaims { required: missing }
    } else if !any_permission_applicable {
        Decision::Deny { reason: DenyReason::NoMatchingRule }
    } else {
        Decision::Deny { reason: DenyReason::ConstraintFailed }
    }
}

/// Fixed instant all generated windows are placed around.
pub fn base_instant() -> DateTime<Utc> {
    DateTime::parse_from_rfc3339("2026-06-15T00:00:00Z").unwrap().with_timezone(&Utc)
}

pub const POD: &str = "https://pod.example";
const RESOURCES: [&str; 4] = ["/alice/inbox/", "/alice/inbox/cards/", "/alice/profile/shoe-size", "/bob/notes"];
const PREFIXES: [&str; 3] = ["/alice/", "/alice/inbox/", "/bob/"];
const TYPES: [&str; 2] = ["https://types.example/Inbox", "https://types.example/Profile"];
const WEBIDS: [&str; 2] = ["https://favorite.example/id", "https://other.example/id"];
const CLAIMS: [(&str, &str); 2] = [("role", "shoe-seller"), ("member", "guild")];
const ISSUERS: [&str; 2] = ["https://registry.example", "https://idp.example"];
const FORMATS: [&str; 2] = [formats::VC_JWT, formats::OIDC_ID_TOKEN];
const PURPOSES: [&str; 2] = ["https://purpose.example/greeting", "https://purpose.example/marketing"];

fn arb_scope() -> impl Strategy<Value = Scope> {
    prop_oneof![
        4 => prop::sample::select(vec![Scope::Read, Scope::Append]),
        1 => prop::sample::select(Scope::ALL.to_vec()),
    ]
}

fn arb_target() -> impl Strategy<Value = TargetMatcher> {
    prop_oneof![
        prop::sample::select(RESOURCES.to_vec()).prop_map(|r| TargetMatcher::Resource(format!("{POD}{r}"))),
        prop::sample::select(TYPES.to_vec()).prop_map(|t| TargetMatcher::ResourceType(t.into())),
        prop::sample::select(PREFIXES.to_vec()).prop_map(|p| TargetMatcher::ResourcePrefix(format!("{POD}{p}"))),
    ]
}

fn arb_party() -> impl Strategy<Value = PartyMatcher> {
    prop_oneof![
        Just(PartyMatcher::Anyone),
        prop::sample::select(WEBIDS.to_vec()).prop_map(|w| PartyMatcher::WebId(w.into())),
        (
            prop::sample::select(CLAIMS.to_vec()),
            prop::sample::select(ISSUERS.to_vec()),
            prop::sample::subsequence(FORMATS.to_vec(), 1..=2),
        )
            .prop_map(|((t, v), issuer, fmts)| PartyMatcher::Claim(ClaimMatcher {
                claim_type: t.into(),
                expected_value: v.into(),
                accepted_formats: fmts.into_iter().map(String::from).collect(),
                trusted_issuer: issuer.into(),
            })),
    ]
}

fn arb_constraint() -> impl Strategy<Value = Constraint> {
    prop_oneof![
        (-20i64..20, 1i64..20).prop_map(|(start, len)| {
            let nb = base_instant() + Duration::days(start);
            Constraint::Window(TemporalWindow::new(nb, nb + Duration::days(len)).unwrap())
        }),
        prop::sample::select(PURPOSES.to_vec()).prop_map(|p| Constraint::Purpose(p.into())),
    ]
}

fn arb_rule() -> impl Strategy<Value = Rule> {
    (arb_target(), arb_scope(), arb_party(), prop::collection::vec(arb_constraint(), 0..=2))
        .prop_map(|(target, action, assignee, constraints)| Rule { target, action, assignee, constraints })
}

pub fn arb_policy() -> impl Strategy<Value = PolicyDocument> {
    (0u32..1000, prop::collection::vec(arb_rule(), 1..=3), prop::collection::vec(0u8..4, 3)).prop_map(
        |(n, rules, kinds)| {
            let (mut perms, mut prohibs) = (Vec::new(), Vec::new());
            for (i, rule) in rules.into_iter().enumerate() {
                // mostly permissions, so grants are common enough to matter
                if i > 0 && kinds[i] == 0 {
                    prohibs.push(rule);
                } else {
                    perms.push(rule);
                }
            }
            PolicyDocument::new(format!("https://alice.example/policies/{n}"), perms, prohibs).unwrap()
        },
    )
}

pub fn arb_request() -> impl Strategy<Value = AccessRequest> {
    (
        prop::sample::select(RESOURCES.to_vec()),
        prop::option::of(prop::sample::select(TYPES.to_vec())),
        arb_scope(),
        prop::option::of(prop::sample::select(PURPOSES.to_vec())),
    )
        .prop_map(|(r, t, action, purpose)| AccessRequest {
            resource_id: format!("{POD}{r}"),
            resource_type: t.map(String::from),
            action,
            purpose: purpose.map(String::from),
        })
}

pub fn arb_claim() -> impl Strategy<Value = VerifiedClaim> {
    prop_oneof![
        (prop::sample::select(WEBIDS.to_vec()), prop::sample::select(ISSUERS.to_vec())).prop_map(|(w, i)| {
            VerifiedClaim {
                claim_type: "webid".into(),
                value: w.into(),
                issuer: i.into(),
                format: formats::OIDC_ID_TOKEN.into(),
            }
        }),
        (
            prop::sample::select(CLAIMS.to_vec()),
            prop::sample::select(ISSUERS.to_vec()),
            prop::sample::select(FORMATS.to_vec()),
        )
            .prop_map(|((t, v), i, f)| VerifiedClaim {
                claim_type: t.into(),
                value: v.into(),
                issuer: i.into(),
                format: f.into()
            }),
    ]
}

pub fn arb_instant() -> impl Strategy<Value = DateTime<Utc>> {
    (-25i64 * 24..25 * 24).prop_map(|h| base_instant() + Duration::hours(h))
}

/// One evaluation input: ≤5 policies of ≤3 rules with ≤2 constraints each.
#[derive(Debug, Clone)]
pub struct Instance {
    pub request: AccessRequest,
    pub claims: Vec<VerifiedClaim>,
    pub policies: Vec<PolicyDocument>,
    pub now: DateTime<Utc>,
}

pub fn arb_instance() -> impl Strategy<Value = Instance> {
    (
        arb_request(),
        prop::collection::vec(arb_claim(), 0..=3),
        prop::collection::vec(arb_policy(), 0..=5),
        arb_instant(),
    )
        .prop_map(|(request, claims, policies, now)| Instance { request, claims, policies, now })
}
