//! Deterministic in-process wiring of an authorization server, a resource
//! server and a client over a recording network, driven by JSON scenario
//! scripts.
//!
//! All parties share one manual clock that only the script advances. Keys
//! are derived from party labels, so two runs of a script mint identical
//! key sets.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use chrono::{DateTime, Duration, Utc};
use http::{header, HeaderMap, Method};
use serde::{Deserialize, Serialize};
use umax_authz::{AsSettings, AuthorizationServer, RsAllowlist, RsKeySource};
use umax_claims::issue::{id_token, vc_token};
use umax_claims::TrustedIssuer;
use umax_core::net::{header_str, origin_of};
use umax_core::security::SigningKeyPair;
use umax_core::uma::{PermissionDescriptor, JWKS_PATH};
use umax_core::{ClaimToken, Clock, HttpRequest, HttpResponse, ManualClock, Scope, Service, Transport, TransportError};
use umax_policy::{load_policy_dir, parse_policy, LoadError, PolicyDocument, PolicyFormat};
use umax_rs::{KeySetService, ResourceServer, RsSettings, StartupError, Store};

use crate::audit::AuditRecord;
use crate::provider::Wallet;
use crate::session::{AccessError, UmaClient};

pub const AS_ORIGIN: &str = "http://as.example";
pub const RS_ORIGIN: &str = "http://pod.example";
/// OpenID provider trusted by the harness authorization server.
pub const IDP_ISSUER: &str = "https://idp.example";
/// Credential registry trusted by the harness authorization server.
pub const REGISTRY_ISSUER: &str = "https://registry.flemish.example";

pub const CLIENT: &str = "client";
pub const RS: &str = "rs";
pub const AS: &str = "as";

/// Ed25519 key whose seed is the SHA-256 of `label`; `label` is also the kid.
pub fn party_key(label: &str) -> SigningKeyPair {
    let digest = ring::digest::digest(&ring::digest::SHA256, label.as_bytes());
    let seed: [u8; 32] = digest.as_ref().try_into().expect("sha-256 is 32 bytes");
    SigningKeyPair::from_seed(label, seed)
}

/// One request seen by the network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Exchange {
    pub from: String,
    /// Origin of the receiving service.
    pub to: String,
    pub method: String,
    /// Path and query.
    pub path: String,
    /// Absent when no service answered.
    pub status: Option<u16>,
    /// `error` member of a JSON response body.
    pub error: Option<String>,
}

/// Origin-routed in-process network. Every request sent by any endpoint is
/// recorded exactly once, in the order requests were sent.
#[derive(Default)]
pub struct Network {
    services: RwLock<HashMap<String, Arc<dyn Service>>>,
    transcript: Mutex<Vec<Exchange>>,
}

impl Network {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    /// Routes `origin` to `service`, replacing any earlier mount.
    pub fn mount(&self, origin: &str, service: Arc<dyn Service>) {
        self.services.write().unwrap().insert(origin.to_owned(), service);
    }

    pub fn unmount(&self, origin: &str) {
        self.services.write().unwrap().remove(origin);
    }

    /// Transport whose requests are recorded as coming from `party`.
    pub fn endpoint(self: &Arc<Self>, party: &str) -> Arc<dyn Transport> {
        Arc::new(Endpoint { network: Arc::clone(self), party: party.to_owned() })
    }

    pub fn transcript(&self) -> Vec<Exchange> {
        self.transcript.lock().unwrap().clone()
    }

    pub fn len(&self) -> usize {
        self.transcript.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

struct Endpoint {
    network: Arc<Network>,
    party: String,
}

impl Transport for Endpoint {
    fn send(&self, request: HttpRequest) -> Result<HttpResponse, TransportError> {
        let uri = request.uri().to_string();
        let origin = origin_of(&uri).ok_or_else(|| TransportError::InvalidRequest(format!("not absolute: {uri}")))?;
        let path = request.uri().path_and_query().map_or("/", |p| p.as_str()).to_owned();
        let index = {
            let mut t = self.network.transcript.lock().unwrap();
            t.push(Exchange {
                from: self.party.clone(),
                to: origin.clone(),
                method: request.method().to_string(),
                path,
                status: None,
                error: None,
            });
            t.len() - 1
        };
        let service = self.network.services.read().unwrap().get(&origin).cloned();
        let Some(service) = service else {
            return Err(TransportError::Unreachable(origin));
        };
        let response = service.handle(request);
        let error = json_error(&response);
        let mut t = self.network.transcript.lock().unwrap();
        t[index].status = Some(response.status().as_u16());
        t[index].error = error;
        Ok(response)
    }
}

fn json_error(response: &HttpResponse) -> Option<String> {
    let json = header_str(response.headers(), header::CONTENT_TYPE)?.starts_with("application/json");
    if !json {
        return None;
    }
    let value: serde_json::Value = serde_json::from_slice(response.body()).ok()?;
    value.get("error")?.as_str().map(str::to_owned)
}

/// A running AS, RS and client on one [`Network`].
pub struct World {
    pub network: Arc<Network>,
    pub clock: ManualClock,
    pub authz: Arc<AuthorizationServer>,
    pub rs: Arc<ResourceServer>,
    pub client: UmaClient,
}

impl World {
    /// Starts the AS, then the RS, which registers every stored resource.
    /// The AS learns the RS key from the RS's published key set.
    pub fn start(start: DateTime<Utc>, policies: Vec<PolicyDocument>, pod: Store) -> Result<Self, StartupError> {
        let network = Network::new();
        let clock = ManualClock::new(start);
        let shared: Arc<dyn Clock> = Arc::new(clock.clone());
        let rs_key = party_key(RS);
        let trust = [IDP_ISSUER, REGISTRY_ISSUER]
            .into_iter()
            .map(|issuer| TrustedIssuer::inline(issuer, party_key(issuer).key_set()))
            .collect();
        let allowlist: RsAllowlist =
            BTreeMap::from([(RS_ORIGIN.to_owned(), RsKeySource::Uri(format!("{RS_ORIGIN}{JWKS_PATH}")))]);
        let authz = Arc::new(
            AuthorizationServer::new(AsSettings::new(AS_ORIGIN), party_key(AS), Arc::clone(&shared))
                .with_policies(policies)
                .with_trust(trust)
                .with_rs_allowlist(allowlist)
                .with_transport(network.endpoint(AS)),
        );
        network.mount(AS_ORIGIN, authz.clone());
        network.mount(RS_ORIGIN, Arc::new(KeySetService(rs_key.key_set())));
        let rs = Arc::new(ResourceServer::start(
            RsSettings::new(RS_ORIGIN, AS_ORIGIN),
            rs_key,
            pod,
            network.endpoint(RS),
            Arc::clone(&shared),
        )?);
        network.mount(RS_ORIGIN, rs.clone());
        let client = UmaClient::new(network.endpoint(CLIENT), shared);
        Ok(Self { network, clock, authz, rs, client })
    }

    /// Mints a claim token with the named issuer's harness key, issued now.
    pub fn issue(&self, credential: &Credential) -> ClaimToken {
        let now = self.clock.now();
        match credential {
            Credential::Oidc { issuer, sub, webid, valid_days } => {
                id_token(&party_key(issuer), issuer, sub, webid.as_deref(), now, Duration::days(*valid_days))
            }
            Credential::Vc { issuer, subject, claims, valid_days } => {
                vc_token(&party_key(issuer), issuer, subject, claims, now, Duration::days(*valid_days))
            }
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{RS_ORIGIN}{path}")
    }
}

// ---- scenario scripts ----

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid script: {0}")]
    Invalid(String),
    #[error("policies: {0}")]
    Policies(#[from] LoadError),
    #[error("pod: {0}")]
    Pod(std::io::Error),
    #[error("startup: {0}")]
    Startup(#[from] StartupError),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    pub start: DateTime<Utc>,
    pub policies: PolicySource,
    /// Pod directory; resolved against the script's directory.
    pub pod: String,
    #[serde(default)]
    pub wallets: BTreeMap<String, Vec<Credential>>,
    pub steps: Vec<Step>,
}

/// A policy directory path, or policy documents inline.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PolicySource {
    Dir(String),
    Inline(Vec<serde_json::Value>),
}

fn default_validity() -> i64 {
    365
}

/// Credential minted by the harness when the scenario starts.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub enum Credential {
    #[serde(rename_all = "camelCase")]
    Oidc {
        issuer: String,
        sub: String,
        #[serde(default)]
        webid: Option<String>,
        #[serde(default = "default_validity")]
        valid_days: i64,
    },
    #[serde(rename_all = "camelCase")]
    Vc {
        issuer: String,
        subject: String,
        claims: BTreeMap<String, String>,
        #[serde(default = "default_validity")]
        valid_days: i64,
    },
}

fn get() -> String {
    "GET".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub enum Step {
    #[serde(rename_all = "camelCase")]
    AdvanceClock {
        #[serde(default)]
        days: i64,
        #[serde(default)]
        hours: i64,
        #[serde(default)]
        seconds: i64,
    },
    SetPolicy {
        policies: PolicySource,
    },
    #[serde(rename_all = "camelCase")]
    ClientAccess {
        path: String,
        #[serde(default = "get")]
        method: String,
        #[serde(default)]
        wallet: Option<String>,
        #[serde(default)]
        body: Option<String>,
    },
    /// Ticketless request presenting every token of the wallet.
    #[serde(rename_all = "camelCase")]
    DirectRequest {
        #[serde(default)]
        resource_id: Option<String>,
        #[serde(default)]
        resource_type: Option<String>,
        scopes: Vec<Scope>,
        #[serde(default)]
        purpose: Option<String>,
        #[serde(default)]
        wallet: Option<String>,
    },
    /// Checks the outcome of the latest access or direct request.
    AssertStatus {
        #[serde(default)]
        status: Option<u16>,
        #[serde(default)]
        error: Option<String>,
    },
    /// Counts exchanges made during the latest access or direct request.
    #[serde(rename_all = "camelCase")]
    AssertRoundTrips {
        #[serde(default)]
        client_to_as: Option<usize>,
        #[serde(default)]
        rs_to_as: Option<usize>,
        #[serde(default)]
        client_to_rs: Option<usize>,
    },
}

/// How a client action ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Outcome {
    /// HTTP status of the final resource server response, or 200 for a
    /// direct grant.
    Status(u16),
    /// Error code such as `request_denied` or `rounds_exhausted`.
    Error(String),
}

pub fn error_code(e: &AccessError) -> String {
    match e {
        AccessError::Denied => "request_denied".into(),
        AccessError::ClaimsUnavailable(_) => "claims_unavailable".into(),
        AccessError::RoundsExhausted(_) => "rounds_exhausted".into(),
        AccessError::AsUnreachable(_) => "as_unreachable".into(),
        AccessError::RsUnreachable(_) => "rs_unreachable".into(),
        AccessError::ChallengeMalformed(_) => "challenge_malformed".into(),
        AccessError::NeedInfo(_) => "need_info".into(),
        AccessError::Token { body, .. } => body.error.clone(),
        AccessError::Audit(_) => "audit_failed".into(),
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StepReport {
    pub index: usize,
    pub step: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
    /// Assertion failure message.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Transcript {
    pub exchanges: Vec<Exchange>,
    pub steps: Vec<StepReport>,
    /// Audit records of every grant, in order.
    pub audit: Vec<AuditRecord>,
    pub elapsed_ms: u128,
}

impl Transcript {
    pub fn passed(&self) -> bool {
        self.steps.iter().all(|s| s.failure.is_none())
    }

    pub fn failures(&self) -> impl Iterator<Item = &StepReport> {
        self.steps.iter().filter(|s| s.failure.is_some())
    }
}

/// A finished run; the world stays available for further inspection.
pub struct ScenarioRun {
    pub world: World,
    pub transcript: Transcript,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<(Self, PathBuf), ScenarioError> {
        let bytes = std::fs::read(path).map_err(|e| ScenarioError::Invalid(format!("{}: {e}", path.display())))?;
        let script = serde_json::from_slice(&bytes).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((script, base))
    }

    /// Checks references before anything runs.
    fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |m: String| Err(ScenarioError::Invalid(m));
        for (name, creds) in &self.wallets {
            for c in creds {
                let issuer = match c {
                    Credential::Oidc { issuer, .. } | Credential::Vc { issuer, .. } => issuer,
                };
                if issuer != IDP_ISSUER && issuer != REGISTRY_ISSUER {
                    return invalid(format!("wallet `{name}`: unknown issuer `{issuer}`"));
                }
            }
        }
        let mut acted = false;
        for (i, step) in self.steps.iter().enumerate() {
            match step {
                Step::ClientAccess { wallet, method, path, .. } => {
                    acted = true;
                    if Method::from_bytes(method.as_bytes()).is_err() {
                        return invalid(format!("step {i}: bad method `{method}`"));
                    }
                    if !path.starts_with('/') {
                        return invalid(format!("step {i}: path must start with `/`"));
                    }
                    self.check_wallet(i, wallet.as_deref())?;
                }
                Step::DirectRequest { wallet, resource_id, resource_type, .. } => {
                    acted = true;
                    if resource_id.is_some() == resource_type.is_some() {
                        return invalid(format!("step {i}: exactly one of resourceId and resourceType"));
                    }
                    self.check_wallet(i, wallet.as_deref())?;
                }
                Step::AssertStatus { status, error } => {
                    if !acted {
                        return invalid(format!("step {i}: assertion before any request"));
                    }
                    if status.is_some() == error.is_some() {
                        return invalid(format!("step {i}: exactly one of status and error"));
                    }
                }
                Step::AssertRoundTrips { .. } if !acted => {
                    return invalid(format!("step {i}: assertion before any request"));
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn check_wallet(&self, step: usize, wallet: Option<&str>) -> Result<(), ScenarioError> {
        match wallet {
            Some(w) if !self.wallets.contains_key(w) => {
                Err(ScenarioError::Invalid(format!("step {step}: unknown wallet `{w}`")))
            }
            _ => Ok(()),
        }
    }
}

fn load_policies(source: &PolicySource, base: &Path) -> Result<Vec<PolicyDocument>, ScenarioError> {
    match source {
        PolicySource::Dir(dir) => Ok(load_policy_dir(&base.join(dir))?),
        PolicySource::Inline(docs) => docs
            .iter()
            .map(|d| {
                let bytes = serde_json::to_vec(d).expect("json value serializes");
                parse_policy(&bytes, PolicyFormat::ProfileJson).map_err(|e| ScenarioError::Invalid(e.to_string()))
            })
            .collect(),
    }
}

/// Runs `script` step by step. Relative paths resolve against `base`.
/// Assertion failures are reported in the transcript, not as errors.
pub fn run_scenario(script: &Scenario, base: &Path) -> Result<ScenarioRun, ScenarioError> {
    script.validate()?;
    let started = Instant::now();
    let policies = load_policies(&script.policies, base)?;
    let pod = Store::load(&base.join(&script.pod)).map_err(ScenarioError::Pod)?;
    let world = World::start(script.start, policies, pod)?;
    let wallets: HashMap<&str, Wallet> = script
        .wallets
        .iter()
        .map(|(name, creds)| (name.as_str(), Wallet::new(creds.iter().map(|c| world.issue(c)).collect())))
        .collect();
    let empty = Wallet::default();
    let wallet = |name: &Option<String>| name.as_deref().map_or(&empty, |n| &wallets[n]);

    let mut steps = Vec::new();
    let mut audit = Vec::new();
    let mut last: Option<(Outcome, std::ops::Range<usize>)> = None;
    for (index, step) in script.steps.iter().enumerate() {
        let mut report = StepReport { index, step: step_name(step).into(), outcome: None, failure: None };
        match step {
            Step::AdvanceClock { days, hours, seconds } => {
                world.clock.advance(Duration::days(*days) + Duration::hours(*hours) + Duration::seconds(*seconds));
            }
            Step::SetPolicy { policies } => world.authz.set_policies(load_policies(policies, base)?),
            Step::ClientAccess { path, method, wallet: w, body } => {
                let begin = world.network.len();
                let method = Method::from_bytes(method.as_bytes()).expect("validated");
                let body = body.clone().unwrap_or_default().into_bytes();
                let outcome = match world.client.access(method, &world.url(path), HeaderMap::new(), body, wallet(w)) {
                    Ok(done) => {
                        audit.extend(done.audit);
                        Outcome::Status(done.response.status().as_u16())
                    }
                    Err(e) => Outcome::Error(error_code(&e)),
                };
                report.outcome = Some(outcome.clone());
                last = Some((outcome, begin..world.network.len()));
            }
            Step::DirectRequest { resource_id, resource_type, scopes, purpose, wallet: w } => {
                let begin = world.network.len();
                let descriptor = PermissionDescriptor {
                    resource_id: resource_id.as_ref().map(|p| world.url(p)),
                    resource_type: resource_type.clone(),
                    resource_scopes: scopes.clone(),
                    purpose: purpose.clone(),
                };
                let tokens = wallet(w).tokens().to_vec();
                let outcome = match world.client.request_direct(AS_ORIGIN, vec![descriptor], tokens) {
                    Ok(record) => {
                        audit.push(record);
                        Outcome::Status(200)
                    }
                    Err(e) => Outcome::Error(error_code(&e)),
                };
                report.outcome = Some(outcome.clone());
                last = Some((outcome, begin..world.network.len()));
            }
            Step::AssertStatus { status, error } => {
                let (actual, _) = last.as_ref().expect("validated");
                let expected = match (status, error) {
                    (Some(s), _) => Outcome::Status(*s),
                    (_, Some(e)) => Outcome::Error(e.clone()),
                    _ => unreachable!("validated"),
                };
                if *actual != expected {
                    report.failure = Some(format!("expected {expected:?}, got {actual:?}"));
                }
            }
            Step::AssertRoundTrips { client_to_as, rs_to_as, client_to_rs } => {
                let (_, range) = last.as_ref().expect("validated");
                let exchanges = world.network.transcript();
                let count = |from: &str, to: &str| {
                    exchanges[range.clone()].iter().filter(|e| e.from == from && e.to == to).count()
                };
                let mut problems = Vec::new();
                for (label, expected, actual) in [
                    ("clientToAs", client_to_as, count(CLIENT, AS_ORIGIN)),
                    ("rsToAs", rs_to_as, count(RS, AS_ORIGIN)),
                    ("clientToRs", client_to_rs, count(CLIENT, RS_ORIGIN)),
                ] {
                    if let Some(e) = expected {
                        if *e != actual {
                            problems.push(format!("{label}: expected {e}, got {actual}"));
                        }
                    }
                }
                if !problems.is_empty() {
                    report.failure = Some(problems.join("; "));
                }
            }
        }
        steps.push(report);
    }
    let transcript =
        Transcript { exchanges: world.network.transcript(), steps, audit, elapsed_ms: started.elapsed().as_millis() };
    Ok(ScenarioRun { world, transcript })
}

fn step_name(step: &Step) -> &'static str {
    match step {
        Step::AdvanceClock { .. } => "advanceClock",
        Step::SetPolicy { .. } => "setPolicy",
        Step::ClientAccess { .. } => "clientAccess",
        Step::DirectRequest { .. } => "directRequest",
        Step::AssertStatus { .. } => "assertStatus",
        Step::AssertRoundTrips { .. } => "assertRoundTrips",
    }
}
