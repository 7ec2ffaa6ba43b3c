#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use http::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;
use umax_authz::{AsSettings, AuthorizationServer, RsAllowlist, RsKeySource};
use umax_claims::issue::{id_token, vc_token};
use umax_claims::TrustedIssuer;
use umax_core::net::{form_request, json_request, parse_json};
use umax_core::security::{sign_http_message, SigningKeyPair};
use umax_core::uma::{PermissionRequest, RegistrationCreated, ResourceDescription, REGISTRATION_PATH};
pub use umax_core::Clock;
use umax_core::{ClaimToken, HttpRequest, HttpResponse, ManualClock, Scope, Service};

pub const AS: &str = "http://as.example";
pub const RS: &str = "http://pod.example";
pub const IDP: &str = "https://idp.example";
pub const REGISTRY: &str = "https://registry.flemish.example";
pub const FAVORITE: &str = "https://favorite.example/id";
pub const INBOX_TYPE: &str = "https://types.example/Inbox";

pub fn t0() -> DateTime<Utc> {
    DateTime::parse_from_rfc3339("2026-06-15T12:00:00Z").unwrap().with_timezone(&Utc)
}

pub fn key(label: &str, seed: u8) -> SigningKeyPair {
    SigningKeyPair::from_seed(label, [seed; 32])
}

pub fn idp_key() -> SigningKeyPair {
    key("idp-1", 11)
}

pub fn registry_key() -> SigningKeyPair {
    key("registry-1", 12)
}

pub fn trust() -> Vec<TrustedIssuer> {
    vec![TrustedIssuer::inline(IDP, idp_key().key_set()), TrustedIssuer::inline(REGISTRY, registry_key().key_set())]
}

pub fn fixture_policies() -> Vec<umax_policy::PolicyDocument> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/policies");
    umax_policy::load_policy_dir(&dir).unwrap()
}

pub fn shoe_seller_vc() -> ClaimToken {
    let claims = BTreeMap::from([("role".to_string(), "shoe-seller".to_string())]);
    vc_token(
        &registry_key(),
        REGISTRY,
        "https://shoes.example/org",
        &claims,
        t0() - Duration::days(30),
        Duration::days(365),
    )
}

pub fn favorite_id_token() -> ClaimToken {
    id_token(&idp_key(), IDP, "friend", Some(FAVORITE), t0() - Duration::days(30), Duration::days(365))
}

pub struct Fixture {
    pub server: Arc<AuthorizationServer>,
    pub clock: ManualClock,
    pub rs_key: SigningKeyPair,
    pub rs_origin: String,
}

impl Fixture {
    pub fn new(policies: Vec<umax_policy::PolicyDocument>) -> Self {
        Self::at(RS, policies, t0())
    }

    pub fn at(rs_origin: &str, policies: Vec<umax_policy::PolicyDocument>, now: DateTime<Utc>) -> Self {
        let clock = ManualClock::new(now);
        let rs_key = key("pod-1", 21);
        let allowlist = RsAllowlist::from([(rs_origin.to_owned(), RsKeySource::Inline(rs_key.key_set()))]);
        let server = AuthorizationServer::new(AsSettings::new(AS), key("as-1", 1), Arc::new(clock.clone()))
            .with_policies(policies)
            .with_trust(trust())
            .with_rs_allowlist(allowlist);
        Self { server: Arc::new(server), clock, rs_key, rs_origin: rs_origin.to_owned() }
    }

    pub fn sign(&self, mut req: HttpRequest) -> HttpRequest {
        sign_http_message(&mut req, &self.rs_key, self.clock.now());
        req
    }

    pub fn signed_json<T: Serialize>(&self, method: Method, path: &str, body: &T) -> HttpResponse {
        self.server.handle(self.sign(json_request(method, &format!("{AS}{path}"), body)))
    }

    pub fn register(&self, path: &str, resource_type: Option<&str>) -> String {
        let resp = self.signed_json(
            Method::POST,
            REGISTRATION_PATH,
            &ResourceDescription {
                resource_id: format!("{}{path}", self.rs_origin),
                name: None,
                resource_type: resource_type.map(str::to_owned),
                resource_scopes: Scope::ALL.to_vec(),
            },
        );
        assert_eq!(resp.status(), StatusCode::CREATED, "{}", String::from_utf8_lossy(resp.body()));
        body::<RegistrationCreated>(&resp).id
    }

    pub fn permission(&self, path: &str, scopes: &[Scope]) -> HttpResponse {
        let request =
            PermissionRequest { resource_id: format!("{}{path}", self.rs_origin), resource_scopes: scopes.to_vec() };
        self.signed_json(Method::POST, "/perm", &request)
    }

    pub fn ticket(&self, path: &str, scopes: &[Scope]) -> String {
        let resp = self.permission(path, scopes);
        assert_eq!(resp.status(), StatusCode::CREATED);
        body::<umax_core::uma::TicketIssued>(&resp).ticket
    }

    pub fn token(&self, request: &umax_authz::TokenRequest) -> HttpResponse {
        let form = request.to_form();
        let pairs: Vec<(&str, &str)> = form.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        self.server.handle(form_request(&format!("{AS}/token"), &pairs))
    }
}

pub fn body<T: DeserializeOwned>(resp: &HttpResponse) -> T {
    parse_json(resp.body()).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(resp.body())))
}

pub fn error_code(resp: &HttpResponse) -> String {
    body::<serde_json::Value>(resp)["error"].as_str().unwrap_or_default().to_owned()
}
