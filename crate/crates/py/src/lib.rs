//! Python bindings: policy evaluation, scenario runs and audit verification.
//!
//! Structured values cross the boundary as JSON text and come back as plain
//! Python objects. Malformed input raises `ValueError`.

use std::path::Path;

use chrono::{DateTime, Utc};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde_json::{json, Value};
use umax_client::audit::{verify_audit as verify_record, AuditRecord};
use umax_client::harness::{party_key, run_scenario as run, Scenario};
use umax_core::security::KeySetDocument;
use umax_core::{Scope, VerifiedClaim};
use umax_policy::{parse_policy, AccessRequest, Decision, PolicyDocument, PolicyFormat};

fn invalid(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_python<'py>(py: Python<'py>, value: &Value) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (value.to_string(),))
}

/// A single policy object or an array of them.
fn parse_policies(text: &str) -> Result<Vec<PolicyDocument>, String> {
    let value: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let docs = match value {
        Value::Array(items) => items,
        one => vec![one],
    };
    docs.iter()
        .map(|d| parse_policy(d.to_string().as_bytes(), PolicyFormat::ProfileJson).map_err(|e| e.to_string()))
        .collect()
}

fn decision_json(decision: &Decision) -> Value {
    match decision {
        Decision::Grant { granted_action, usage_requirements } => json!({
            "decision": "grant",
            "grantedAction": granted_action,
            "usageRequirements": usage_requirements,
        }),
        Decision::Deny { reason } => json!({ "decision": "deny", "reason": reason.as_str() }),
        Decision::NeedClaims { required } => json!({ "decision": "need_claims", "required": required }),
    }
}

/// Evaluates one access request. `claims` is a JSON array of verified
/// claims (`claim_type`, `value`, `issuer`, `format`); `now` is RFC 3339.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (policies, resource_id, action, now, claims = "[]", resource_type = None, purpose = None))]
fn evaluate<'py>(
    py: Python<'py>,
    policies: &str,
    resource_id: &str,
    action: &str,
    now: &str,
    claims: &str,
    resource_type: Option<String>,
    purpose: Option<String>,
) -> PyResult<Bound<'py, PyAny>> {
    let policies = parse_policies(policies).map_err(invalid)?;
    let action: Scope = action.parse().map_err(invalid)?;
    let now: DateTime<Utc> = DateTime::parse_from_rfc3339(now).map_err(invalid)?.with_timezone(&Utc);
    let claims: Vec<VerifiedClaim> = serde_json::from_str(claims).map_err(invalid)?;
    let request = AccessRequest { resource_id: resource_id.to_owned(), resource_type, action, purpose };
    to_python(py, &decision_json(&umax_policy::evaluate(&request, &claims, &policies, now)))
}

/// Runs a scenario script and returns its transcript plus a `passed` flag.
#[pyfunction]
fn run_scenario<'py>(py: Python<'py>, path: &str) -> PyResult<Bound<'py, PyAny>> {
    let (script, base) = Scenario::load(Path::new(path)).map_err(invalid)?;
    let outcome = run(&script, &base).map_err(invalid)?;
    let mut value = serde_json::to_value(&outcome.transcript).map_err(invalid)?;
    value["passed"] = Value::Bool(outcome.transcript.passed());
    to_python(py, &value)
}

/// Re-verifies a retained audit record against the issuer key set. Both
/// arguments are JSON text.
#[pyfunction]
fn verify_audit<'py>(py: Python<'py>, record: &str, jwks: &str) -> PyResult<Bound<'py, PyAny>> {
    let record: AuditRecord = serde_json::from_str(record).map_err(invalid)?;
    let keys: KeySetDocument = serde_json::from_str(jwks).map_err(invalid)?;
    let report = verify_record(&record, &keys).map_err(invalid)?;
    let mut value = serde_json::to_value(&report).map_err(invalid)?;
    value["sound"] = Value::Bool(report.is_sound());
    to_python(py, &value)
}

/// Public key set of a deterministic scenario party such as `"as"`.
#[pyfunction]
fn party_key_set<'py>(py: Python<'py>, label: &str) -> PyResult<Bound<'py, PyAny>> {
    to_python(py, &serde_json::to_value(party_key(label).key_set()).map_err(invalid)?)
}

#[pymodule]
fn umax(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(verify_audit, m)?)?;
    m.add_function(wrap_pyfunction!(party_key_set, m)?)?;
    Ok(())
}
