#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use http::{Method, StatusCode};
use umax_core::net::{empty_response, json_response, parse_json};
use umax_core::security::{mint_token, verify_http_message, AccessTokenClaims, KeyAllowlist, SigningKeyPair};
use umax_core::uma::{
    AsConfiguration, ErrorBody, PermissionRequest, PublicHint, RegistrationCreated, ResourceDescription,
    ResourcePermission, TicketIssued,
};
use umax_core::{Clock, HttpRequest, HttpResponse, ManualClock, Scope, Transport, TransportError};
use umax_rs::{ResourceServer, RsSettings, Store, StoredResource};

pub const AS: &str = "http://as.example";
pub const RS: &str = "http://pod.example";

pub fn t0() -> DateTime<Utc> {
    DateTime::parse_from_rfc3339("2026-06-15T12:00:00Z").unwrap().with_timezone(&Utc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Answer {
    Public,
    Ticket,
    Fail,
}

#[derive(Default)]
pub struct StubState {
    pub calls: Vec<(Method, String)>,
    pub registrations: BTreeMap<String, ResourceDescription>,
    pub created: usize,
    pub answers: BTreeMap<String, Answer>,
    pub permission_requests: Vec<PermissionRequest>,
    pub tickets_issued: Vec<String>,
    pub down: bool,
    pub signing_key: Option<SigningKeyPair>,
}

/// A scripted authorization server. It checks every protection call's
/// signature against the resource server's key, but holds no policies:
/// permission answers come from `answers`, defaulting to a fresh ticket.
pub struct StubAs {
    pub state: Mutex<StubState>,
    rs_keys: KeyAllowlist,
    clock: ManualClock,
}

impl StubAs {
    pub fn new(rs_key: &SigningKeyPair, clock: ManualClock) -> Arc<Self> {
        let state = StubState { signing_key: Some(as_key()), ..Default::default() };
        Arc::new(Self {
            state: Mutex::new(state),
            rs_keys: KeyAllowlist::from([(RS.to_owned(), rs_key.key_set())]),
            clock,
        })
    }

    pub fn answer(&self, path: &str, answer: Answer) {
        self.state.lock().unwrap().answers.insert(format!("{RS}{path}"), answer);
    }

    pub fn calls(&self) -> Vec<(Method, String)> {
        self.state.lock().unwrap().calls.clone()
    }

    pub fn clear_calls(&self) {
        self.state.lock().unwrap().calls.clear();
    }

    fn respond(&self, req: HttpRequest) -> HttpResponse {
        let path = req.uri().path().to_owned();
        match (req.method().clone(), path.as_str()) {
            (Method::GET, "/.well-known/uma2-configuration") => {
                json_response(StatusCode::OK, &AsConfiguration::for_issuer(AS))
            }
            (Method::GET, "/.well-known/jwks.json") => {
                json_response(StatusCode::OK, &self.state.lock().unwrap().signing_key.as_ref().unwrap().key_set())
            }
            _ => {
                if let Err(e) = verify_http_message(&req, &self.rs_keys, self.clock.now()) {
                    return json_response(
                        StatusCode::UNAUTHORIZED,
                        &ErrorBody::new("invalid_signature", Some(e.to_string())),
                    );
                }
                self.protected(req)
            }
        }
    }

    fn protected(&self, req: HttpRequest) -> HttpResponse {
        let mut s = self.state.lock().unwrap();
        let path = req.uri().path().to_owned();
        match (req.method().clone(), path.as_str()) {
            (Method::POST, "/rreg/") => {
                let desc: ResourceDescription = parse_json(req.body()).unwrap();
                if s.registrations.values().any(|d| d.resource_id == desc.resource_id) {
                    return json_response(StatusCode::CONFLICT, &ErrorBody::new("duplicate_resource", None));
                }
                s.created += 1;
                let id = format!("reg-{}", s.created);
                s.registrations.insert(id.clone(), desc);
                json_response(StatusCode::CREATED, &RegistrationCreated { id })
            }
            (Method::GET, "/rreg/") => {
                let query = req.uri().query().unwrap_or("");
                let wanted = url_param(query, "resource_id");
                match s.registrations.iter().find(|(_, d)| Some(&d.resource_id) == wanted.as_ref()) {
                    Some((id, _)) => json_response(StatusCode::OK, &RegistrationCreated { id: id.clone() }),
                    None => empty_response(StatusCode::NOT_FOUND),
                }
            }
            (Method::DELETE, p) if p.starts_with("/rreg/") => {
                s.registrations.remove(&p["/rreg/".len()..]);
                empty_response(StatusCode::NO_CONTENT)
            }
            (Method::POST, "/perm") => {
                let request: PermissionRequest = parse_json(req.body()).unwrap();
                let registered = s.registrations.values().any(|d| d.resource_id == request.resource_id);
                let answer = s.answers.get(&request.resource_id).copied().unwrap_or(Answer::Ticket);
                s.permission_requests.push(request.clone());
                if !registered {
                    return json_response(StatusCode::BAD_REQUEST, &ErrorBody::new("invalid_resource_id", None));
                }
                match answer {
                    Answer::Public => {
                        json_response(StatusCode::OK, &PublicHint { public_scopes: request.resource_scopes })
                    }
                    Answer::Ticket => {
                        let ticket = format!("ticket-{}", s.tickets_issued.len());
                        s.tickets_issued.push(ticket.clone());
                        json_response(StatusCode::CREATED, &TicketIssued { ticket })
                    }
                    Answer::Fail => empty_response(StatusCode::INTERNAL_SERVER_ERROR),
                }
            }
            _ => empty_response(StatusCode::NOT_FOUND),
        }
    }
}

fn url_param(query: &str, key: &str) -> Option<String> {
    url::form_urlencoded::parse(query.as_bytes()).find(|(k, _)| k == key).map(|(_, v)| v.into_owned())
}

impl Transport for StubAs {
    fn send(&self, req: HttpRequest) -> Result<HttpResponse, TransportError> {
        {
            let mut s = self.state.lock().unwrap();
            if s.down {
                return Err(TransportError::Unreachable(AS.into()));
            }
            s.calls.push((req.method().clone(), req.uri().path().to_owned()));
        }
        Ok(self.respond(req))
    }
}

pub fn as_key() -> SigningKeyPair {
    SigningKeyPair::from_seed("stub-as-1", [5; 32])
}

pub fn rs_key() -> SigningKeyPair {
    SigningKeyPair::from_seed("pod-1", [21; 32])
}

pub fn pod_store() -> Store {
    let mut store = Store::in_memory();
    seed(&mut store, StoredResource::container("/alice/"));
    seed(&mut store, StoredResource::container("/alice/profile/"));
    seed(&mut store, StoredResource::new("/alice/profile/shoe-size", "text/plain", b"43".to_vec()));
    seed(&mut store, StoredResource::container("/alice/public/"));
    seed(&mut store, StoredResource::new("/alice/public/card.png", "image/png", b"\x89PNG".to_vec()));
    seed(&mut store, StoredResource::container("/alice/inbox/").with_type("https://types.example/Inbox"));
    store
}

fn seed(store: &mut Store, r: StoredResource) {
    store.add(r).unwrap();
}

pub struct Pod {
    pub server: ResourceServer,
    pub stub: Arc<StubAs>,
    pub clock: ManualClock,
}

pub fn pod() -> Pod {
    let clock = ManualClock::new(t0());
    let stub = StubAs::new(&rs_key(), clock.clone());
    let server =
        ResourceServer::start(RsSettings::new(RS, AS), rs_key(), pod_store(), stub.clone(), Arc::new(clock.clone()))
            .unwrap();
    stub.clear_calls();
    Pod { server, stub, clock }
}

impl Pod {
    pub fn token(&self, permissions: &[(&str, &[Scope])]) -> String {
        self.token_with(|_| {}, permissions)
    }

    pub fn token_with(&self, tweak: impl FnOnce(&mut AccessTokenClaims), permissions: &[(&str, &[Scope])]) -> String {
        let now = self.clock.now().timestamp();
        let mut claims = AccessTokenClaims {
            iss: AS.into(),
            sub: "anonymous".into(),
            aud: RS.into(),
            iat: now,
            exp: now + 600,
            jti: "jti".into(),
            permissions: permissions
                .iter()
                .map(|(p, s)| ResourcePermission { resource_id: format!("{RS}{p}"), resource_scopes: s.to_vec() })
                .collect(),
            usage: vec![],
        };
        tweak(&mut claims);
        let key = self.stub.state.lock().unwrap().signing_key.clone().unwrap();
        mint_token(&claims, &key).unwrap()
    }
}

pub fn request(method: Method, path: &str, bearer: Option<&str>, body: &[u8]) -> HttpRequest {
    let mut b = http::Request::builder().method(method).uri(path);
    if let Some(t) = bearer {
        b = b.header("authorization", format!("Bearer {t}"));
    }
    b.body(body.to_vec()).unwrap()
}
