use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Duration, Utc};
use http::{header, Method, StatusCode};
use umax_core::net::{empty_request, empty_response, header_str, json_request, json_response, parse_json};
use umax_core::security::jws::decode_unverified;
use umax_core::security::{
    random_id, sign_http_message, verify_token, AccessTokenClaims, KeySetDocument, SigningKeyPair, TokenError,
};
use umax_core::uma::{
    AsConfiguration, ErrorBody, PermissionRequest, RegistrationCreated, ResourceDescription, TicketIssued,
    UmaChallenge, JWKS_PATH, RESOURCE_TYPE_HEADER, UMA_CONFIGURATION_PATH,
};
use umax_core::{Clock, HttpRequest, HttpResponse, Scope, Service, Transport};

use crate::store::{normalize_path, Store, StoredResource};

const KEY_REFRESH_INTERVAL_SECS: i64 = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsSettings {
    /// Origin clients reach this server at; resource IRIs are built on it.
    pub origin: String,
    /// Issuer of the authorization server all resources are protected by.
    pub as_uri: String,
}

impl RsSettings {
    pub fn new(origin: impl Into<String>, as_uri: impl Into<String>) -> Self {
        Self {
            origin: origin.into().trim_end_matches('/').to_owned(),
            as_uri: as_uri.into().trim_end_matches('/').to_owned(),
        }
    }
}

/// Fixed method-to-scope table.
pub fn scope_for(method: &Method) -> Option<Scope> {
    match *method {
        Method::GET | Method::HEAD => Some(Scope::Read),
        Method::POST => Some(Scope::Append),
        Method::PUT | Method::PATCH => Some(Scope::Write),
        Method::DELETE => Some(Scope::Delete),
        _ => None,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error("authorization server unreachable: {0}")]
    AsUnreachable(String),
    #[error("cannot register `{path}`: {reason}")]
    Registration { path: String, reason: String },
}

#[derive(Debug, thiserror::Error)]
enum AsError {
    #[error("{0}")]
    Transport(String),
    #[error("unexpected status {status}: {body}")]
    Unexpected { status: StatusCode, body: String },
}

enum PermissionAnswer {
    Public,
    Ticket(String),
    UnknownResource,
}

/// Outcome of [`ResourceServer::register_all`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RegistrationSummary {
    pub created: usize,
    pub already_registered: usize,
}

enum Access {
    Allowed,
    Refused(HttpResponse),
}

pub struct ResourceServer {
    settings: RsSettings,
    key: SigningKeyPair,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    as_config: AsConfiguration,
    as_keys: RwLock<KeySetDocument>,
    last_key_fetch: Mutex<DateTime<Utc>>,
    store: RwLock<Store>,
    writes: Mutex<()>,
}

impl ResourceServer {
    /// Fetches the authorization server's discovery document and keys, then
    /// registers every stored resource that lacks a registration.
    pub fn start(
        settings: RsSettings,
        key: SigningKeyPair,
        store: Store,
        transport: Arc<dyn Transport>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, StartupError> {
        let unreachable = |e: String| StartupError::AsUnreachable(e);
        let discovery_uri = format!("{}{UMA_CONFIGURATION_PATH}", settings.as_uri);
        let as_config: AsConfiguration = fetch_json(&*transport, &discovery_uri).map_err(unreachable)?;
        if as_config.issuer != settings.as_uri {
            return Err(unreachable(format!("discovery names issuer `{}`", as_config.issuer)));
        }
        let as_keys: KeySetDocument = fetch_json(&*transport, &as_config.jwks_uri).map_err(unreachable)?;
        let now = clock.now();
        let server = Self {
            settings,
            key,
            transport,
            clock,
            as_config,
            as_keys: RwLock::new(as_keys),
            last_key_fetch: Mutex::new(now),
            store: RwLock::new(store),
            writes: Mutex::new(()),
        };
        server.register_all()?;
        Ok(server)
    }

    pub fn settings(&self) -> &RsSettings {
        &self.settings
    }

    pub fn key_set(&self) -> KeySetDocument {
        self.key.key_set()
    }

    pub fn resource_iri(&self, path: &str) -> String {
        format!("{}{path}", self.settings.origin)
    }

    pub fn registration_of(&self, path: &str) -> Option<String> {
        self.store.read().expect("store lock").entry(path).and_then(|e| e.registration.clone())
    }

    pub fn get(&self, path: &str) -> Option<StoredResource> {
        self.store.read().expect("store lock").get(path).cloned()
    }

    /// Idempotent: a conflict at the authorization server means the resource
    /// is registered already, and its id is looked up instead.
    pub fn register_all(&self) -> Result<RegistrationSummary, StartupError> {
        let _guard = self.writes.lock().expect("write lock");
        let pending: Vec<StoredResource> = {
            let store = self.store.read().expect("store lock");
            let paths: Vec<String> = store.paths().map(str::to_owned).collect();
            paths
                .iter()
                .filter_map(|p| store.entry(p))
                .filter(|e| e.registration.is_none())
                .map(|e| e.resource.clone())
                .collect()
        };
        let mut summary = RegistrationSummary::default();
        for resource in pending {
            let (id, created) = self
                .register(&resource)
                .map_err(|e| StartupError::Registration { path: resource.path.clone(), reason: e.to_string() })?;
            if created {
                summary.created += 1;
            } else {
                summary.already_registered += 1;
            }
            self.store.write().expect("store lock").set_registration(&resource.path, Some(id));
        }
        tracing::info!(created = summary.created, existing = summary.already_registered, "registry synchronized");
        Ok(summary)
    }

    // ---- calls to the authorization server ----

    fn signed(&self, mut request: HttpRequest) -> Result<HttpResponse, AsError> {
        sign_http_message(&mut request, &self.key, self.clock.now());
        self.transport.send(request).map_err(|e| AsError::Transport(e.to_string()))
    }

    fn register(&self, resource: &StoredResource) -> Result<(String, bool), AsError> {
        let description = ResourceDescription {
            resource_id: self.resource_iri(&resource.path),
            name: None,
            resource_type: resource.resource_type.clone(),
            resource_scopes: Scope::ALL.to_vec(),
        };
        let endpoint = &self.as_config.resource_registration_endpoint;
        let resp = self.signed(json_request(Method::POST, endpoint, &description))?;
        match resp.status() {
            StatusCode::CREATED => Ok((registration_id(&resp)?, true)),
            StatusCode::CONFLICT => {
                let query = url::form_urlencoded::Serializer::new(String::new())
                    .append_pair("resource_id", &description.resource_id)
                    .finish();
                let resp = self.signed(empty_request(Method::GET, &format!("{endpoint}?{query}")))?;
                match resp.status() {
                    StatusCode::OK => Ok((registration_id(&resp)?, false)),
                    _ => Err(unexpected(&resp)),
                }
            }
            _ => Err(unexpected(&resp)),
        }
    }

    fn deregister(&self, id: &str) -> Result<(), AsError> {
        let uri = format!("{}{id}", self.as_config.resource_registration_endpoint);
        let resp = self.signed(empty_request(Method::DELETE, &uri))?;
        match resp.status() {
            StatusCode::NO_CONTENT | StatusCode::NOT_FOUND => Ok(()),
            _ => Err(unexpected(&resp)),
        }
    }

    fn request_permission(&self, resource_iri: &str, scope: Scope) -> Result<PermissionAnswer, AsError> {
        let body = PermissionRequest { resource_id: resource_iri.to_owned(), resource_scopes: vec![scope] };
        let resp = self.signed(json_request(Method::POST, &self.as_config.permission_endpoint, &body))?;
        match resp.status() {
            StatusCode::OK => Ok(PermissionAnswer::Public),
            StatusCode::CREATED => {
                let issued: TicketIssued = parse_json(resp.body()).map_err(|_| unexpected(&resp))?;
                Ok(PermissionAnswer::Ticket(issued.ticket))
            }
            StatusCode::BAD_REQUEST => match parse_json::<ErrorBody>(resp.body()) {
                Ok(e) if e.error == "invalid_resource_id" => Ok(PermissionAnswer::UnknownResource),
                _ => Err(unexpected(&resp)),
            },
            _ => Err(unexpected(&resp)),
        }
    }

    /// Tokens are checked locally; an unknown key id triggers one refetch of
    /// the authorization server's key set.
    fn verify_bearer(&self, token: &str) -> Option<AccessTokenClaims> {
        let now = self.clock.now();
        let keys = self.as_keys.read().expect("key lock").clone();
        let claims = match verify_token(token, &keys, now) {
            Err(TokenError::BadSignature) if self.kid_unknown(token, &keys) && self.refresh_as_keys() => {
                verify_token(token, &self.as_keys.read().expect("key lock"), now)
            }
            other => other,
        };
        match claims {
            Ok(c) if c.iss == self.as_config.issuer && c.aud == self.settings.origin => Some(c),
            Ok(c) => {
                tracing::info!(iss = %c.iss, aud = %c.aud, "token for another issuer or audience");
                None
            }
            Err(e) => {
                tracing::info!(error = %e, "bearer token rejected");
                None
            }
        }
    }

    fn kid_unknown(&self, token: &str, keys: &KeySetDocument) -> bool {
        decode_unverified(token).ok().and_then(|(h, _)| h.kid).is_some_and(|kid| keys.find(&kid).is_none())
    }

    fn refresh_as_keys(&self) -> bool {
        let now = self.clock.now();
        {
            let mut last = self.last_key_fetch.lock().expect("fetch lock");
            if now >= *last && now - *last < Duration::seconds(KEY_REFRESH_INTERVAL_SECS) {
                return false;
            }
            *last = now;
        }
        match fetch_json::<KeySetDocument>(&*self.transport, &self.as_config.jwks_uri) {
            Ok(keys) => {
                *self.as_keys.write().expect("key lock") = keys;
                true
            }
            Err(e) => {
                tracing::warn!(error = %e, "cannot refresh authorization server keys");
                false
            }
        }
    }

    // ---- request handling ----

    fn authorize(&self, request: &HttpRequest, target: &str, scope: Scope) -> Access {
        let iri = self.resource_iri(target);
        let bearer = header_str(request.headers(), header::AUTHORIZATION).and_then(|v| v.strip_prefix("Bearer "));
        if let Some(claims) = bearer.and_then(|t| self.verify_bearer(t.trim())) {
            return if claims.covers(&iri, scope) {
                Access::Allowed
            } else {
                Access::Refused(empty_response(StatusCode::FORBIDDEN))
            };
        }
        match self.request_permission(&iri, scope) {
            Ok(PermissionAnswer::Public) => Access::Allowed,
            Ok(PermissionAnswer::Ticket(ticket)) => Access::Refused(self.challenge(Some(ticket))),
            Ok(PermissionAnswer::UnknownResource) => Access::Refused(self.challenge(None)),
            Err(e) => {
                tracing::warn!(error = %e, "permission request failed");
                Access::Refused(empty_response(StatusCode::BAD_GATEWAY))
            }
        }
    }

    fn challenge(&self, ticket: Option<String>) -> HttpResponse {
        let value = UmaChallenge { realm: self.settings.origin.clone(), as_uri: self.settings.as_uri.clone(), ticket }
            .to_header_value();
        let mut resp = empty_response(StatusCode::UNAUTHORIZED);
        resp.headers_mut().insert(header::WWW_AUTHENTICATE, value.parse().expect("challenge is a valid header"));
        resp
    }

    /// The resource a request's scope is checked against. Creating a resource
    /// is a write on the nearest existing container.
    fn target_of(&self, method: &Method, path: &str) -> String {
        let store = self.store.read().expect("store lock");
        if *method == Method::PUT && !store.contains(path) {
            store.nearest_container(path)
        } else {
            path.to_owned()
        }
    }

    fn serve(&self, request: HttpRequest, path: &str, target: &str) -> HttpResponse {
        match *request.method() {
            Method::GET | Method::HEAD => self.read(path, request.method() == Method::HEAD),
            Method::PUT => self.put(request, path, target),
            Method::POST => self.post(request, path),
            Method::PATCH => self.patch(request, path),
            Method::DELETE => self.delete(path),
            _ => empty_response(StatusCode::METHOD_NOT_ALLOWED),
        }
    }

    fn read(&self, path: &str, head: bool) -> HttpResponse {
        let store = self.store.read().expect("store lock");
        let Some(resource) = store.get(path) else { return empty_response(StatusCode::NOT_FOUND) };
        let body = if resource.is_container() {
            let members: Vec<String> = store.children(path).iter().map(|p| self.resource_iri(p)).collect();
            serde_json::to_vec(&members).expect("listing serializes")
        } else {
            resource.body.clone()
        };
        let len = body.len();
        let mut resp = http::Response::builder()
            .status(StatusCode::OK)
            .header(header::CONTENT_TYPE, &resource.content_type)
            .header(header::CONTENT_LENGTH, len)
            .body(if head { Vec::new() } else { body })
            .expect("valid response");
        if let Some(ty) = &resource.resource_type {
            if let Ok(v) = ty.parse() {
                resp.headers_mut().insert(RESOURCE_TYPE_HEADER, v);
            }
        }
        resp
    }

    fn put(&self, request: HttpRequest, path: &str, target: &str) -> HttpResponse {
        let _guard = self.writes.lock().expect("write lock");
        let exists = self.store.read().expect("store lock").contains(path);
        let authorized_as_update = target == path;
        if exists != authorized_as_update {
            // the path was created or removed after authorization
            return empty_response(StatusCode::CONFLICT);
        }
        if exists {
            if path.ends_with('/') {
                return empty_response(StatusCode::CONFLICT);
            }
            return self.replace(request, path);
        }
        let content_type = content_type(&request);
        let resource_type = header_str(request.headers(), RESOURCE_TYPE_HEADER).map(str::to_owned);
        let leaf = if path.ends_with('/') {
            StoredResource::container(path)
        } else {
            StoredResource::new(path, content_type, request.into_body())
        };
        let leaf = StoredResource { resource_type, ..leaf };
        self.create(leaf)
    }

    fn post(&self, request: HttpRequest, path: &str) -> HttpResponse {
        let _guard = self.writes.lock().expect("write lock");
        let Some(existing) = self.get(path) else { return empty_response(StatusCode::NOT_FOUND) };
        if !existing.is_container() {
            let mut store = self.store.write().expect("store lock");
            let registration = store.entry(path).and_then(|e| e.registration.clone());
            let mut updated = existing;
            updated.body.extend_from_slice(request.body());
            return match store.insert(updated, registration) {
                Ok(()) => empty_response(StatusCode::NO_CONTENT),
                Err(e) => storage_failure(e),
            };
        }
        let slug = header_str(request.headers(), "slug")
            .map(|s| {
                s.chars().filter(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.')).collect::<String>()
            })
            .filter(|s| !s.is_empty() && !s.starts_with('.'))
            .unwrap_or_else(|| random_id(9));
        let mut child = format!("{path}{slug}");
        if self.store.read().expect("store lock").contains(&child) {
            child = format!("{child}-{}", random_id(6));
        }
        let resource_type = header_str(request.headers(), RESOURCE_TYPE_HEADER).map(str::to_owned);
        let resource =
            StoredResource { resource_type, ..StoredResource::new(child, content_type(&request), request.into_body()) };
        self.create(resource)
    }

    fn patch(&self, request: HttpRequest, path: &str) -> HttpResponse {
        let _guard = self.writes.lock().expect("write lock");
        match self.get(path) {
            None => empty_response(StatusCode::NOT_FOUND),
            Some(r) if r.is_container() => empty_response(StatusCode::CONFLICT),
            Some(_) => self.replace(request, path),
        }
    }

    /// Caller holds the write lock.
    fn replace(&self, request: HttpRequest, path: &str) -> HttpResponse {
        let mut store = self.store.write().expect("store lock");
        let entry = store.entry(path).expect("checked by caller").clone();
        let updated =
            StoredResource { content_type: content_type(&request), body: request.into_body(), ..entry.resource };
        match store.insert(updated, entry.registration) {
            Ok(()) => empty_response(StatusCode::NO_CONTENT),
            Err(e) => storage_failure(e),
        }
    }

    /// Registers `leaf` and any missing ancestor containers, then stores them.
    /// Caller holds the write lock.
    fn create(&self, leaf: StoredResource) -> HttpResponse {
        let mut fresh: Vec<StoredResource> = self
            .store
            .read()
            .expect("store lock")
            .missing_ancestors(&leaf.path)
            .into_iter()
            .map(StoredResource::container)
            .collect();
        let location = self.resource_iri(&leaf.path);
        fresh.push(leaf);

        let mut registered: Vec<(StoredResource, String)> = Vec::new();
        for resource in fresh {
            match self.register(&resource) {
                Ok((id, _)) => registered.push((resource, id)),
                Err(e) => {
                    tracing::warn!(path = %resource.path, error = %e, "registration failed; creation rolled back");
                    for (_, id) in &registered {
                        let _ = self.deregister(id);
                    }
                    return empty_response(StatusCode::BAD_GATEWAY);
                }
            }
        }
        let mut store = self.store.write().expect("store lock");
        let mut pending = registered.into_iter();
        while let Some((resource, id)) = pending.next() {
            if let Err(e) = store.insert(resource, Some(id.clone())) {
                for id in std::iter::once(id).chain(pending.map(|(_, id)| id)) {
                    let _ = self.deregister(&id);
                }
                return storage_failure(e);
            }
        }
        let mut resp = empty_response(StatusCode::CREATED);
        resp.headers_mut().insert(header::LOCATION, location.parse().expect("IRI is a valid header"));
        resp
    }

    fn delete(&self, path: &str) -> HttpResponse {
        let _guard = self.writes.lock().expect("write lock");
        let registration = {
            let store = self.store.read().expect("store lock");
            let Some(entry) = store.entry(path) else { return empty_response(StatusCode::NOT_FOUND) };
            if path == "/" || !store.children(path).is_empty() {
                return empty_response(StatusCode::CONFLICT);
            }
            entry.registration.clone()
        };
        if let Some(id) = registration {
            if let Err(e) = self.deregister(&id) {
                tracing::warn!(%path, error = %e, "deregistration failed; resource kept");
                return empty_response(StatusCode::BAD_GATEWAY);
            }
        }
        match self.store.write().expect("store lock").remove(path) {
            Ok(_) => empty_response(StatusCode::NO_CONTENT),
            Err(e) => storage_failure(e),
        }
    }
}

impl Service for ResourceServer {
    fn handle(&self, request: HttpRequest) -> HttpResponse {
        let raw_path = request.uri().path().to_owned();
        if raw_path == JWKS_PATH && request.method() == Method::GET {
            return json_response(StatusCode::OK, &self.key.key_set());
        }
        let Ok(path) = normalize_path(&raw_path) else { return empty_response(StatusCode::BAD_REQUEST) };
        let Some(scope) = scope_for(request.method()) else { return empty_response(StatusCode::METHOD_NOT_ALLOWED) };
        let target = self.target_of(request.method(), &path);
        match self.authorize(&request, &target, scope) {
            Access::Allowed => self.serve(request, &path, &target),
            Access::Refused(resp) => resp,
        }
    }
}

/// Serves only a key set, for the window between binding a resource
/// server's address and finishing its startup, during which the
/// authorization server may already fetch its keys.
pub struct KeySetService(pub KeySetDocument);

impl Service for KeySetService {
    fn handle(&self, request: HttpRequest) -> HttpResponse {
        if request.method() == Method::GET && request.uri().path() == JWKS_PATH {
            json_response(StatusCode::OK, &self.0)
        } else {
            empty_response(StatusCode::SERVICE_UNAVAILABLE)
        }
    }
}

fn fetch_json<T: serde::de::DeserializeOwned>(transport: &dyn Transport, uri: &str) -> Result<T, String> {
    let resp = transport.send(empty_request(Method::GET, uri)).map_err(|e| e.to_string())?;
    if resp.status() != StatusCode::OK {
        return Err(format!("GET {uri}: status {}", resp.status()));
    }
    parse_json(resp.body()).map_err(|e| format!("GET {uri}: {e}"))
}

fn registration_id(resp: &HttpResponse) -> Result<String, AsError> {
    parse_json::<RegistrationCreated>(resp.body()).map(|r| r.id).map_err(|_| unexpected(resp))
}

fn unexpected(resp: &HttpResponse) -> AsError {
    AsError::Unexpected { status: resp.status(), body: String::from_utf8_lossy(resp.body()).into_owned() }
}

fn content_type(request: &HttpRequest) -> String {
    header_str(request.headers(), header::CONTENT_TYPE).unwrap_or("application/octet-stream").to_owned()
}

fn storage_failure(e: std::io::Error) -> HttpResponse {
    tracing::error!(error = %e, "storage write failed");
    empty_response(StatusCode::INTERNAL_SERVER_ERROR)
}
