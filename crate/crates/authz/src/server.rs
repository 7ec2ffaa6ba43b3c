use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use http::{Method, StatusCode};
use umax_claims::{verify_claim_token, TrustedIssuer};
use umax_core::net::{empty_request, parse_json};
use umax_core::security::{
    mint_token, random_id, verify_http_message, verify_token, AccessTokenClaims, KeyAllowlist, KeyRing, KeySetDocument,
    SignatureError, SigningKeyPair,
};
use umax_core::uma::{
    GrantBody, IntrospectionBody, NeedInfoBody, PermissionDescriptor, PermissionRequest, ResourceDescription,
    ResourcePermission,
};
use umax_core::{ClaimRequirement, Clock, HttpRequest, Scope, Transport, UsageRequirement, VerifiedClaim};
use umax_policy::{evaluate, is_public, AccessRequest, Decision, PolicyDocument};

use crate::config::{AsSettings, RsAllowlist, RsKeySource};
use crate::error::{GrantError, ProtectionError};
use crate::registry::{Registry, ResourceRegistration};
use crate::tickets::{PermissionTicket, RequestedPermission, TicketStore};
use crate::token::TokenRequest;

const TICKET_BYTES: usize = 32;
const REGISTRATION_ID_BYTES: usize = 16;
const GRANT_LOG_CAPACITY: usize = 4096;
/// Unknown key ids trigger a key refetch at most this often.
const KEY_REFRESH_INTERVAL_SECS: i64 = 10;

/// Result of a permission request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PermissionOutcome {
    /// Every requested scope is granted to anyone; no ticket was created.
    Public(Vec<Scope>),
    Ticket(String),
}

/// Non-error result of a token request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenOutcome {
    Granted(GrantBody),
    NeedInfo(NeedInfoBody),
}

/// Inputs and output of one issued grant, kept so any grant can be
/// re-evaluated later.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrantRecord {
    pub jti: String,
    pub decided_at: DateTime<Utc>,
    pub claims: Vec<VerifiedClaim>,
    pub requests: Vec<AccessRequest>,
    pub permissions: Vec<ResourcePermission>,
}

pub struct AuthorizationServer {
    settings: AsSettings,
    keys: RwLock<KeyRing>,
    policies: RwLock<Arc<Vec<PolicyDocument>>>,
    trust: Vec<TrustedIssuer>,
    rs_sources: RsAllowlist,
    rs_keys: RwLock<KeyAllowlist>,
    last_refresh: Mutex<Option<DateTime<Utc>>>,
    transport: Option<Arc<dyn Transport>>,
    clock: Arc<dyn Clock>,
    registry: Mutex<Registry>,
    tickets: Mutex<TicketStore>,
    grants: Mutex<VecDeque<GrantRecord>>,
    discovery: Vec<u8>,
}

impl AuthorizationServer {
    pub fn new(settings: AsSettings, key: SigningKeyPair, clock: Arc<dyn Clock>) -> Self {
        let discovery = serde_json::to_vec(&umax_core::uma::AsConfiguration::for_issuer(&settings.issuer))
            .expect("discovery document serializes");
        Self {
            settings,
            keys: RwLock::new(KeyRing::new(key)),
            policies: RwLock::new(Arc::new(Vec::new())),
            trust: Vec::new(),
            rs_sources: RsAllowlist::new(),
            rs_keys: RwLock::new(KeyAllowlist::new()),
            last_refresh: Mutex::new(None),
            transport: None,
            clock,
            registry: Mutex::new(Registry::default()),
            tickets: Mutex::new(TicketStore::default()),
            grants: Mutex::new(VecDeque::new()),
            discovery,
        }
    }

    pub fn with_policies(self, policies: Vec<PolicyDocument>) -> Self {
        self.set_policies(policies);
        self
    }

    /// `trust` must already be resolved; issuers whose keys are still a URI
    /// cannot verify anything.
    pub fn with_trust(mut self, trust: Vec<TrustedIssuer>) -> Self {
        self.trust = trust;
        self
    }

    /// Inline key sets are usable at once; URI sources are fetched through
    /// the transport on first use and again whenever an unknown key id shows
    /// up.
    pub fn with_rs_allowlist(mut self, allowlist: RsAllowlist) -> Self {
        let inline = allowlist
            .iter()
            .filter_map(|(origin, src)| match src {
                RsKeySource::Inline(set) => Some((origin.clone(), set.clone())),
                RsKeySource::Uri(_) => None,
            })
            .collect();
        self.rs_sources = allowlist;
        self.rs_keys = RwLock::new(inline);
        self
    }

    pub fn with_transport(mut self, transport: Arc<dyn Transport>) -> Self {
        self.transport = Some(transport);
        self
    }

    pub fn settings(&self) -> &AsSettings {
        &self.settings
    }

    pub fn issuer(&self) -> &str {
        &self.settings.issuer
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    /// Replaces the policy set. Evaluations already running keep the
    /// snapshot they started with.
    pub fn set_policies(&self, policies: Vec<PolicyDocument>) {
        *self.policies.write().expect("policy lock") = Arc::new(policies);
    }

    pub fn policies(&self) -> Arc<Vec<PolicyDocument>> {
        self.policies.read().expect("policy lock").clone()
    }

    pub fn discovery_bytes(&self) -> &[u8] {
        &self.discovery
    }

    pub fn key_set(&self) -> KeySetDocument {
        self.keys.read().expect("key lock").key_set(self.clock.now())
    }

    pub fn rotate_key(&self, next: SigningKeyPair) -> Result<(), umax_core::security::KeyError> {
        self.keys.write().expect("key lock").rotate(next, self.clock.now())
    }

    pub fn grant_log(&self) -> Vec<GrantRecord> {
        self.grants.lock().expect("grant lock").iter().cloned().collect()
    }

    pub fn registrations(&self) -> Vec<ResourceRegistration> {
        let mut all: Vec<_> = self.registry.lock().expect("registry lock").iter().cloned().collect();
        all.sort_by(|a, b| a.resource_id.cmp(&b.resource_id));
        all
    }

    pub fn live_tickets(&self) -> usize {
        self.tickets.lock().expect("ticket lock").len()
    }

    // ---- resource server authentication ----

    /// Origin of the allowlisted resource server that signed `request`.
    pub fn authenticate(&self, request: &HttpRequest) -> Result<String, ProtectionError> {
        let now = self.clock.now();
        let first = {
            let keys = self.rs_keys.read().expect("rs key lock");
            verify_http_message(request, &keys, now)
        };
        let result = match first {
            Err(SignatureError::UnknownKey(_)) if self.refresh_rs_keys() => {
                let keys = self.rs_keys.read().expect("rs key lock");
                verify_http_message(request, &keys, now)
            }
            other => other,
        };
        result.map_err(|e| {
            tracing::info!(error = %e, "rejected resource server request");
            ProtectionError::Unauthenticated(e.to_string())
        })
    }

    /// Re-fetches every URI key source; returns whether anything was fetched.
    fn refresh_rs_keys(&self) -> bool {
        let Some(transport) = &self.transport else { return false };
        {
            let now = self.clock.now();
            let mut last = self.last_refresh.lock().expect("refresh lock");
            if last.is_some_and(|t| now - t < chrono::Duration::seconds(KEY_REFRESH_INTERVAL_SECS) && now >= t) {
                return false;
            }
            *last = Some(now);
        }
        let mut fetched = false;
        for (origin, source) in &self.rs_sources {
            let RsKeySource::Uri(uri) = source else { continue };
            let set = transport
                .send(empty_request(Method::GET, uri))
                .ok()
                .filter(|resp| resp.status() == StatusCode::OK)
                .and_then(|resp| parse_json::<KeySetDocument>(resp.body()).ok());
            match set {
                Some(set) => {
                    self.rs_keys.write().expect("rs key lock").insert(origin.clone(), set);
                    fetched = true;
                }
                None => tracing::warn!(%origin, %uri, "could not fetch resource server keys"),
            }
        }
        fetched
    }

    // ---- resource registration ----

    pub fn register_resource(&self, rs: &str, desc: ResourceDescription) -> Result<String, ProtectionError> {
        validate_description(rs, &desc)?;
        let reg = ResourceRegistration {
            id: random_id(REGISTRATION_ID_BYTES),
            rs_origin: rs.to_owned(),
            resource_id: desc.resource_id,
            name: desc.name,
            resource_type: desc.resource_type,
            scopes: dedup_scopes(&desc.resource_scopes),
        };
        let id = reg.id.clone();
        self.registry.lock().expect("registry lock").insert(reg).map_err(ProtectionError::Duplicate)?;
        tracing::debug!(%rs, %id, "registered resource");
        Ok(id)
    }

    pub fn get_resource(&self, rs: &str, id: &str) -> Result<ResourceRegistration, ProtectionError> {
        let registry = self.registry.lock().expect("registry lock");
        registry.get(id).filter(|r| r.rs_origin == rs).cloned().ok_or(ProtectionError::NotFound)
    }

    pub fn find_resource(&self, rs: &str, resource_id: &str) -> Option<ResourceRegistration> {
        self.registry.lock().expect("registry lock").find(rs, resource_id).cloned()
    }

    pub fn list_resources(&self, rs: &str) -> Vec<String> {
        let registry = self.registry.lock().expect("registry lock");
        let mut ids: Vec<String> = registry.iter().filter(|r| r.rs_origin == rs).map(|r| r.id.clone()).collect();
        ids.sort();
        ids
    }

    /// Replaces a registration's description. Live tickets naming it are
    /// dropped because their scopes may no longer be registered.
    pub fn update_resource(&self, rs: &str, id: &str, desc: ResourceDescription) -> Result<(), ProtectionError> {
        validate_description(rs, &desc)?;
        let mut registry = self.registry.lock().expect("registry lock");
        let current = registry.get(id).filter(|r| r.rs_origin == rs).cloned().ok_or(ProtectionError::NotFound)?;
        if current.resource_id != desc.resource_id {
            if let Some(other) = registry.find(rs, &desc.resource_id) {
                return Err(ProtectionError::Duplicate(other.id.clone()));
            }
            registry.remove(id);
            let moved = ResourceRegistration { resource_id: desc.resource_id.clone(), ..current };
            registry.insert(moved).expect("slot checked free");
        }
        let reg = registry.get_mut(id).expect("registration present");
        reg.name = desc.name;
        reg.resource_type = desc.resource_type;
        reg.scopes = dedup_scopes(&desc.resource_scopes);
        self.tickets.lock().expect("ticket lock").drop_registration(id);
        Ok(())
    }

    pub fn delete_resource(&self, rs: &str, id: &str) -> Result<(), ProtectionError> {
        let mut registry = self.registry.lock().expect("registry lock");
        if registry.get(id).is_none_or(|r| r.rs_origin != rs) {
            return Err(ProtectionError::NotFound);
        }
        registry.remove(id);
        self.tickets.lock().expect("ticket lock").drop_registration(id);
        Ok(())
    }

    // ---- permission endpoint ----

    /// `resource_id` may be the registration id or the resource IRI.
    pub fn create_permission(
        &self,
        rs: &str,
        request: PermissionRequest,
    ) -> Result<PermissionOutcome, ProtectionError> {
        let reg = {
            let registry = self.registry.lock().expect("registry lock");
            registry
                .get(&request.resource_id)
                .filter(|r| r.rs_origin == rs)
                .or_else(|| registry.find(rs, &request.resource_id))
                .cloned()
                .ok_or(ProtectionError::InvalidResourceId)?
        };
        let scopes = dedup_scopes(&request.resource_scopes);
        if scopes.is_empty() || !scopes.iter().all(|s| reg.scopes.contains(s)) {
            return Err(ProtectionError::InvalidScope);
        }
        let now = self.clock.now();
        let policies = self.policies();
        if scopes.iter().all(|s| is_public(&reg.resource_id, reg.resource_type.as_deref(), *s, &policies, now)) {
            return Ok(PermissionOutcome::Public(scopes));
        }
        let ticket = PermissionTicket {
            value: random_id(TICKET_BYTES),
            issued_at: now,
            ttl: self.settings.ticket_ttl,
            requested: vec![RequestedPermission { registration_id: reg.id, scopes, purpose: None }],
            round: 0,
        };
        let value = ticket.value.clone();
        self.tickets.lock().expect("ticket lock").insert(ticket);
        Ok(PermissionOutcome::Ticket(value))
    }

    // ---- token endpoint ----

    pub fn handle_token_request(&self, request: TokenRequest) -> Result<TokenOutcome, GrantError> {
        let now = self.clock.now();
        let (requested, round) = match (&request.ticket, &request.permissions) {
            (Some(value), None) => {
                let ticket =
                    self.tickets.lock().expect("ticket lock").consume(value).ok_or(GrantError::InvalidGrant)?;
                if ticket.expired_at(now) {
                    return Err(GrantError::InvalidGrant);
                }
                (ticket.requested, ticket.round)
            }
            (None, Some(descriptors)) => (self.resolve_descriptors(descriptors)?, 0),
            _ => return Err(GrantError::InvalidRequest("either ticket or permissions is required".into())),
        };

        let mut claims = Vec::new();
        for token in &request.claim_tokens {
            let verified = verify_claim_token(token, &self.trust, now).map_err(|e| {
                tracing::info!(error = %e, format = %token.format, "claim token rejected");
                GrantError::InvalidClaimToken(e.to_string())
            })?;
            claims.extend(verified);
        }
        claims.sort();
        claims.dedup();

        let (registrations, access) = self.access_requests(&requested)?;
        let audience = single_audience(&registrations)?;
        let policies = self.policies();

        let mut granted: BTreeMap<String, BTreeSet<Scope>> = BTreeMap::new();
        let mut usage: BTreeSet<UsageRequirement> = BTreeSet::new();
        let mut missing: BTreeSet<ClaimRequirement> = BTreeSet::new();
        let mut denial = None;
        for req in &access {
            match evaluate(req, &claims, &policies, now) {
                Decision::Grant { usage_requirements, .. } => {
                    granted.entry(req.resource_id.clone()).or_default().insert(req.action);
                    usage.extend(usage_requirements);
                }
                Decision::NeedClaims { required } => missing.extend(required),
                Decision::Deny { reason } => {
                    denial.get_or_insert((req.resource_id.clone(), req.action, reason));
                }
            }
        }

        if let Some((resource, scope, reason)) = denial {
            tracing::info!(%resource, %scope, reason = reason.as_str(), "token request denied");
            return Err(GrantError::RequestDenied);
        }
        if !missing.is_empty() {
            let next_round = round + 1;
            if next_round > self.settings.max_rounds {
                tracing::info!(round, "negotiation bound reached");
                return Err(GrantError::TooManyRounds);
            }
            let ticket = PermissionTicket {
                value: random_id(TICKET_BYTES),
                issued_at: now,
                ttl: self.settings.ticket_ttl,
                requested,
                round: next_round,
            };
            let value = ticket.value.clone();
            self.tickets.lock().expect("ticket lock").insert(ticket);
            return Ok(TokenOutcome::NeedInfo(NeedInfoBody {
                error: "need_info".into(),
                ticket: value,
                required_claims: missing.into_iter().collect(),
            }));
        }

        let permissions: Vec<ResourcePermission> = granted
            .into_iter()
            .map(|(resource_id, scopes)| ResourcePermission {
                resource_id,
                resource_scopes: scopes.into_iter().collect(),
            })
            .collect();
        let usage: Vec<UsageRequirement> = usage.into_iter().collect();
        let jti = random_id(16);
        let token_claims = AccessTokenClaims {
            iss: self.settings.issuer.clone(),
            sub: claims
                .iter()
                .find(|c| c.claim_type == "webid")
                .map_or_else(|| "anonymous".to_owned(), |c| c.value.clone()),
            aud: audience,
            iat: now.timestamp(),
            exp: (now + self.settings.token_ttl).timestamp(),
            jti: jti.clone(),
            permissions: permissions.clone(),
            usage: usage.clone(),
        };
        let access_token = {
            let keys = self.keys.read().expect("key lock");
            mint_token(&token_claims, keys.current()).expect("iat precedes exp")
        };
        self.log_grant(GrantRecord {
            jti,
            decided_at: now,
            claims,
            requests: access,
            permissions: permissions.clone(),
        });
        Ok(TokenOutcome::Granted(GrantBody {
            access_token,
            token_type: "Bearer".into(),
            expires_in: self.settings.token_ttl.num_seconds(),
            permissions,
            usage_requirements: usage,
        }))
    }

    fn resolve_descriptors(
        &self,
        descriptors: &[PermissionDescriptor],
    ) -> Result<Vec<RequestedPermission>, GrantError> {
        if descriptors.is_empty() {
            return Err(GrantError::InvalidRequest("permissions must not be empty".into()));
        }
        let registry = self.registry.lock().expect("registry lock");
        let mut out = Vec::new();
        for d in descriptors {
            let scopes = dedup_scopes(&d.resource_scopes);
            if scopes.is_empty() {
                return Err(GrantError::InvalidScope);
            }
            let matches: Vec<&ResourceRegistration> = match (&d.resource_id, &d.resource_type) {
                (Some(id), None) => registry.iter().filter(|r| &r.resource_id == id).collect(),
                (None, Some(ty)) => registry.iter().filter(|r| r.resource_type.as_ref() == Some(ty)).collect(),
                _ => {
                    return Err(GrantError::InvalidRequest(
                        "each permission needs exactly one of resource_id and resource_type".into(),
                    ))
                }
            };
            if matches.is_empty() {
                return Err(GrantError::InvalidResourceId);
            }
            for reg in matches {
                if !scopes.iter().all(|s| reg.scopes.contains(s)) {
                    return Err(GrantError::InvalidScope);
                }
                out.push(RequestedPermission {
                    registration_id: reg.id.clone(),
                    scopes: scopes.clone(),
                    purpose: d.purpose.clone(),
                });
            }
        }
        Ok(out)
    }

    fn access_requests(
        &self,
        requested: &[RequestedPermission],
    ) -> Result<(Vec<ResourceRegistration>, Vec<AccessRequest>), GrantError> {
        let registry = self.registry.lock().expect("registry lock");
        let mut regs = Vec::new();
        let mut access = Vec::new();
        for r in requested {
            // tickets naming deleted registrations are dropped on delete, so
            // a miss here means a race with deletion
            let reg = registry.get(&r.registration_id).ok_or(GrantError::InvalidResourceId)?;
            for scope in &r.scopes {
                access.push(AccessRequest {
                    resource_id: reg.resource_id.clone(),
                    resource_type: reg.resource_type.clone(),
                    action: *scope,
                    purpose: r.purpose.clone(),
                });
            }
            regs.push(reg.clone());
        }
        Ok((regs, access))
    }

    fn log_grant(&self, record: GrantRecord) {
        let mut log = self.grants.lock().expect("grant lock");
        if log.len() == GRANT_LOG_CAPACITY {
            log.pop_front();
        }
        log.push_back(record);
    }

    // ---- introspection ----

    pub fn introspect(&self, token: &str) -> IntrospectionBody {
        let inactive = IntrospectionBody { active: false, permissions: None, iat: None, exp: None };
        match verify_token(token, &self.key_set(), self.clock.now()) {
            Ok(claims) if claims.iss == self.settings.issuer => IntrospectionBody {
                active: true,
                permissions: Some(claims.permissions),
                iat: Some(claims.iat),
                exp: Some(claims.exp),
            },
            _ => inactive,
        }
    }
}

fn validate_description(rs: &str, desc: &ResourceDescription) -> Result<(), ProtectionError> {
    let origin = umax_core::net::origin_of(&desc.resource_id).ok_or(ProtectionError::InvalidResourceId)?;
    if origin != rs {
        return Err(ProtectionError::InvalidResourceId);
    }
    if desc.resource_scopes.is_empty() {
        return Err(ProtectionError::InvalidScope);
    }
    if let Some(ty) = &desc.resource_type {
        url::Url::parse(ty).map_err(|_| ProtectionError::Malformed(format!("type `{ty}` is not an absolute IRI")))?;
    }
    Ok(())
}

fn dedup_scopes(scopes: &[Scope]) -> Vec<Scope> {
    scopes.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
}

/// Tokens are audience-bound to one resource server.
fn single_audience(regs: &[ResourceRegistration]) -> Result<String, GrantError> {
    let origins: BTreeSet<&str> = regs.iter().map(|r| r.rs_origin.as_str()).collect();
    match origins.len() {
        1 => Ok(origins.into_iter().next().expect("one origin").to_owned()),
        _ => Err(GrantError::InvalidRequest("requested resources span several resource servers".into())),
    }
}
