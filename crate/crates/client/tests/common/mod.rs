#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use http::{header, StatusCode};
use umax_client::harness::{
    run_scenario, Credential, Network, Scenario, ScenarioRun, World, IDP_ISSUER, REGISTRY_ISSUER,
};
use umax_client::provider::Wallet;
use umax_core::net::{empty_response, json_response, parse_form};
use umax_core::uma::{AsConfiguration, NeedInfoBody, UmaChallenge, TOKEN_PATH, UMA_CONFIGURATION_PATH};
use umax_core::{ClaimRequirement, ClaimToken, HttpRequest, HttpResponse, Service};
use umax_policy::load_policy_dir;
use umax_rs::Store;

pub use umax_core::Clock;

pub const INBOX_TYPE: &str = "https://types.example/Inbox";
pub const FAVORITE: &str = "https://favorite.example/id";
pub const SHOE_SIZE: &str = "/alice/profile/shoe-size";
pub const CARD: &str = "/alice/public/card.png";

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Birthday of the pod owner; the birthday-card window spans a week either
/// side of it.
pub fn birthday() -> DateTime<Utc> {
    DateTime::parse_from_rfc3339("2026-06-15T09:00:00Z").unwrap().with_timezone(&Utc)
}

pub fn scenario(name: &str) -> ScenarioRun {
    let (script, base) = Scenario::load(&fixtures().join(format!("scenarios/{name}.json"))).unwrap();
    run_scenario(&script, &base).unwrap()
}

pub fn world_at(start: DateTime<Utc>) -> World {
    let policies = load_policy_dir(&fixtures().join("policies")).unwrap();
    World::start(start, policies, Store::load(&fixtures().join("pod")).unwrap()).unwrap()
}

pub fn shoe_seller(world: &World) -> ClaimToken {
    world.issue(&Credential::Vc {
        issuer: REGISTRY_ISSUER.into(),
        subject: "https://shoes.example/org".into(),
        claims: BTreeMap::from([("role".into(), "shoe-seller".into())]),
        valid_days: 365,
    })
}

pub fn favorite(world: &World) -> ClaimToken {
    world.issue(&Credential::Oidc {
        issuer: IDP_ISSUER.into(),
        sub: "favorite".into(),
        webid: Some(FAVORITE.into()),
        valid_days: 365,
    })
}

pub fn wallet(tokens: Vec<ClaimToken>) -> Wallet {
    Wallet::new(tokens)
}

pub const STUB_AS: &str = "http://stub-as.example";
pub const STUB_RS: &str = "http://stub-rs.example";

/// Authorization server that answers every token request with `need_info`
/// and a fresh ticket, naming the round in the requirement hint. Records the
/// claim tokens of every token request.
#[derive(Default)]
pub struct EndlessNeedInfo {
    pub token_calls: AtomicUsize,
    pub presented: Mutex<Vec<Vec<String>>>,
    pub tickets: Mutex<Vec<String>>,
}

impl Service for EndlessNeedInfo {
    fn handle(&self, request: HttpRequest) -> HttpResponse {
        match request.uri().path() {
            UMA_CONFIGURATION_PATH => json_response(StatusCode::OK, &AsConfiguration::for_issuer(STUB_AS)),
            TOKEN_PATH => {
                let round = self.token_calls.fetch_add(1, Ordering::SeqCst) + 1;
                let form = parse_form(request.body());
                let get =
                    |k: &str| -> Vec<String> { form.iter().filter(|(n, _)| n == k).map(|(_, v)| v.clone()).collect() };
                self.tickets.lock().unwrap().extend(get("ticket"));
                self.presented.lock().unwrap().push(get("claim_token"));
                json_response(
                    StatusCode::FORBIDDEN,
                    &NeedInfoBody {
                        error: "need_info".into(),
                        ticket: format!("stub-ticket-{round}"),
                        required_claims: vec![ClaimRequirement {
                            claim_type: "role".into(),
                            accepted_formats: vec!["urn:test:format".into()],
                            hint: Some(format!("round-{round}")),
                        }],
                    },
                )
            }
            _ => empty_response(StatusCode::NOT_FOUND),
        }
    }
}

/// Resource server that challenges every request without a bearer token
/// and serves `ok` otherwise.
pub struct ChallengingRs;

impl Service for ChallengingRs {
    fn handle(&self, request: HttpRequest) -> HttpResponse {
        if request.headers().contains_key(header::AUTHORIZATION) {
            return http::Response::builder().status(200).body(b"ok".to_vec()).unwrap();
        }
        let challenge =
            UmaChallenge { realm: STUB_RS.into(), as_uri: STUB_AS.into(), ticket: Some("stub-ticket-0".into()) };
        http::Response::builder()
            .status(StatusCode::UNAUTHORIZED)
            .header(header::WWW_AUTHENTICATE, challenge.to_header_value())
            .body(Vec::new())
            .unwrap()
    }
}

pub fn stub_network(authz: Arc<dyn Service>) -> Arc<Network> {
    let network = Network::new();
    network.mount(STUB_AS, authz);
    network.mount(STUB_RS, Arc::new(ChallengingRs));
    network
}

/// Provider that answers each requirement with a token derived from its
/// hint, so every round yields something new.
pub fn hint_echo(required: &[ClaimRequirement]) -> Vec<ClaimToken> {
    required.iter().map(|r| ClaimToken::new("urn:test:format", r.hint.clone().unwrap_or_default())).collect()
}

/// `umax serve-as` and `umax serve-rs` as two child processes on distinct
/// loopback origins, seeded with the fixture policies and pod rewritten for
/// the resource server's real origin.
pub struct Deployment {
    children: Vec<std::process::Child>,
    pub as_origin: String,
    pub rs_origin: String,
    pub dir: tempfile::TempDir,
}

pub const REGISTRY_SEED: [u8; 32] = [12u8; 32];

impl Deployment {
    pub fn start() -> Result<Self, String> {
        use std::io::BufRead;
        use std::process::{Command, Stdio};
        use umax_core::security::SigningKeyPair;

        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let path = |name: &str| dir.path().join(name);
        let write = |name: &str, value: &serde_json::Value| {
            std::fs::write(path(name), serde_json::to_vec_pretty(value).unwrap()).unwrap()
        };
        let as_key = SigningKeyPair::generate("as-1");
        let rs_key = SigningKeyPair::generate("rs-1");
        let registry = SigningKeyPair::from_seed("registry-1", REGISTRY_SEED);
        write("as.jwk", &serde_json::to_value(as_key.to_private_jwk()).unwrap());
        write("rs.jwk", &serde_json::to_value(rs_key.to_private_jwk()).unwrap());
        write("registry.jwk", &serde_json::to_value(registry.to_private_jwk()).unwrap());
        write("as-jwks.json", &serde_json::to_value(as_key.key_set()).unwrap());

        let (as_port, rs_port) = (free_port()?, free_port()?);
        let as_origin = format!("http://127.0.0.1:{as_port}");
        let rs_origin = format!("http://127.0.0.1:{rs_port}");
        write("allowlist.json", &serde_json::json!({ &rs_origin: format!("{rs_origin}/.well-known/jwks.json") }));
        write("trust.json", &serde_json::json!([{ "issuer": REGISTRY_ISSUER, "jwks": registry.key_set() }]));
        std::fs::create_dir(path("policies")).unwrap();
        for entry in std::fs::read_dir(fixtures().join("policies")).unwrap() {
            let entry = entry.unwrap();
            let text = std::fs::read_to_string(entry.path()).unwrap().replace("http://pod.example", &rs_origin);
            std::fs::write(path("policies").join(entry.file_name()), text).unwrap();
        }
        copy_tree(&fixtures().join("pod"), &path("pod"));

        let spawn = |args: Vec<String>| -> Result<std::process::Child, String> {
            let mut child = Command::new(env!("CARGO_BIN_EXE_umax"))
                .args(&args)
                .env("RUST_LOG", "warn")
                .stdout(Stdio::piped())
                .stderr(Stdio::inherit())
                .spawn()
                .map_err(|e| e.to_string())?;
            let stdout = child.stdout.take().unwrap();
            let (tx, rx) = std::sync::mpsc::channel();
            std::thread::spawn(move || {
                let mut line = String::new();
                let _ = std::io::BufReader::new(stdout).read_line(&mut line);
                let _ = tx.send(line);
            });
            match rx.recv_timeout(std::time::Duration::from_secs(30)) {
                Ok(line) if line.starts_with("listening ") => Ok(child),
                other => {
                    let _ = child.kill();
                    Err(format!("{} did not start: {other:?}", args[0]))
                }
            }
        };
        let s = |p: std::path::PathBuf| p.display().to_string();
        let mut children = Vec::new();
        children.push(spawn(vec![
            "serve-as".into(),
            "--bind".into(),
            format!("127.0.0.1:{as_port}"),
            "--policies".into(),
            s(path("policies")),
            "--key".into(),
            s(path("as.jwk")),
            "--rs-allowlist".into(),
            s(path("allowlist.json")),
            "--trust".into(),
            s(path("trust.json")),
        ])?);
        let rs = spawn(vec![
            "serve-rs".into(),
            "--bind".into(),
            format!("127.0.0.1:{rs_port}"),
            "--as".into(),
            as_origin.clone(),
            "--root".into(),
            s(path("pod")),
            "--key".into(),
            s(path("rs.jwk")),
        ]);
        let mut deployment = Self { children, as_origin, rs_origin, dir };
        deployment.children.push(rs?);
        Ok(deployment)
    }

    pub fn path(&self, name: &str) -> std::path::PathBuf {
        self.dir.path().join(name)
    }

    /// Runs a `umax` client subcommand to completion.
    pub fn umax(&self, args: &[&str]) -> std::process::Output {
        std::process::Command::new(env!("CARGO_BIN_EXE_umax")).args(args).env("RUST_LOG", "warn").output().unwrap()
    }

    /// Writes a shoe-seller credential valid from now and returns its path.
    pub fn shoe_seller_file(&self) -> String {
        let key = umax_core::security::SigningKeyPair::from_seed("registry-1", REGISTRY_SEED);
        let claims = BTreeMap::from([("role".to_string(), "shoe-seller".to_string())]);
        let token = umax_claims::issue::vc_token(
            &key,
            REGISTRY_ISSUER,
            "https://shoes.example/org",
            &claims,
            Utc::now() - chrono::Duration::minutes(1),
            chrono::Duration::days(1),
        );
        let file = self.path("shoe-seller.jwt");
        std::fs::write(&file, token.raw).unwrap();
        file.display().to_string()
    }
}

impl Drop for Deployment {
    fn drop(&mut self) {
        for child in &mut self.children {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

fn free_port() -> Result<u16, String> {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").map_err(|e| e.to_string())?;
    Ok(listener.local_addr().unwrap().port())
}

fn copy_tree(from: &std::path::Path, to: &std::path::Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_tree(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), &target).unwrap();
        }
    }
}
