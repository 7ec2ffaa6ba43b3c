//! Usage-control policy engine over a closed ODRL profile.
//!
//! Policies are sets of permission and prohibition rules. Evaluation is a pure
//! function of the request, the verified claims, the policy set and an
//! explicit instant:
//!
//! 1. rules whose target and action match the request are *applicable*;
//! 2. an applicable prohibition whose assignee and constraints hold denies;
//! 3. otherwise an applicable permission whose assignee and constraints hold
//!    grants, returning the constraints of every granting rule as usage
//!    requirements;
//! 4. otherwise, if some applicable permission is held back only by missing
//!    assignee claims, the missing claims are requested;
//! 5. otherwise the request is denied.
//!
//! Rule order never matters.

mod engine;
mod model;
mod parse;
#[cfg(feature = "testing")]
pub mod testing;

pub use engine::{evaluate, is_public};
pub use model::{
    AccessRequest, Action, ClaimMatcher, Decision, DenyReason, PartyMatcher, PolicyDocument, Rule, TargetMatcher,
};
pub use parse::{load_policy_dir, parse_policy, to_profile_json, LoadError, PolicyError, PolicyFormat};
pub use umax_core::{ClaimRequirement, Constraint, TemporalWindow, UsageRequirement, VerifiedClaim};
