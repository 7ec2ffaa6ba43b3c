//! One check per acceptance criterion; prints a PASS/FAIL line for each and
//! exits non-zero when any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use chrono::{DateTime, Duration, Utc};
use common::*;
use http::{header, HeaderMap, Method, StatusCode};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use umax_authz::TokenRequest;
use umax_client::audit::verify_audit;
use umax_client::harness::{party_key, World, AS_ORIGIN, CLIENT, RS, RS_ORIGIN};
use umax_client::session::{AccessError, UmaClient};
use umax_core::net::{empty_request, form_request, header_str, json_request, parse_json};
use umax_core::security::token::{mint_token, verify_token, AccessTokenClaims, TokenError};
use umax_core::security::{sign_http_message, SigningKeyPair};
use umax_core::uma::{
    ErrorBody, PermissionDescriptor, PermissionRequest, ResourcePermission, UmaChallenge, PERMISSION_PATH, TOKEN_PATH,
};
use umax_core::{ClaimRequirement, Constraint, ManualClock, Scope, Service, TemporalWindow, UsageRequirement};
use umax_policy::testing::{arb_instance, brute_force_evaluate};
use umax_policy::{evaluate, PartyMatcher, PolicyDocument, TargetMatcher};
use umax_rs::Store;

type Check = fn(&Shared) -> Result<(), String>;

/// State prepared once and reused across criteria.
struct Shared {
    deployment: Result<Deployment, String>,
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !($cond) {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let shared = Shared { deployment: Deployment::start() };
    let criteria: [(u8, &str, Check); 10] = [
        (1, "negotiation: 401 -> need_info -> grant -> 200 with rotating tickets", negotiation),
        (2, "flexible authentication: VC and OIDC grants, format-free AS", flexible_authentication),
        (3, "expressive policies: oracle agreement and birthday window", expressive_policies),
        (4, "ticketless requests: direct grant equals union of ticketed grants", ticketless_requests),
        (5, "auditability: usage requirements and post-expiry verification", auditability),
        (6, "separation: AS and RS as separate processes, RS free of policy code", separation),
        (7, "public resources: one RS->AS call, no client->AS call, plain client", public_resources),
        (8, "RS->AS signatures: tamper, stale and unlisted key rejected", signed_requests),
        (9, "protocol safety: single-use tickets, bound, default deny, scope fidelity", protocol_safety),
        (10, "token correctness: roundtrip, tamper detection, expiry boundary", token_correctness),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        let started = Instant::now();
        let result = match catch_unwind(AssertUnwindSafe(|| check(&shared))) {
            Ok(r) => r,
            Err(panic) => Err(panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        let ms = started.elapsed().as_millis();
        match result {
            Ok(()) => println!("criterion {n:>2} PASS {name} ({ms} ms)"),
            Err(why) => {
                failed += 1;
                println!("criterion {n:>2} FAIL {name}: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn access(
    world: &World,
    method: Method,
    path: &str,
    provider: &dyn umax_client::provider::ClaimsProvider,
) -> Result<umax_client::session::AccessOutcome, AccessError> {
    let body = if method == Method::POST { b"card".to_vec() } else { Vec::new() };
    world.client.access(method, &world.url(path), HeaderMap::new(), body, provider)
}

fn negotiation(_: &Shared) -> Result<(), String> {
    let started = Instant::now();
    let run = scenario("shoe-size");
    let elapsed = started.elapsed();
    ensure!(run.transcript.passed(), "scenario assertions failed: {:?}", run.transcript.failures().collect::<Vec<_>>());
    let sequence: Vec<String> = run
        .transcript
        .exchanges
        .iter()
        .filter(|e| e.from == CLIENT && !e.path.starts_with("/.well-known/"))
        .take(4)
        .map(|e| {
            let party = if e.to == AS_ORIGIN { "token" } else { "rs" };
            format!(
                "{party}:{}{}",
                e.status.unwrap_or(0),
                e.error.as_ref().map(|x| format!(":{x}")).unwrap_or_default()
            )
        })
        .collect();
    let expected = ["rs:401", "token:403:need_info", "token:200", "rs:200"];
    ensure!(sequence == expected, "sequence {sequence:?}");
    let record = &run.transcript.audit[0];
    let distinct: BTreeSet<&String> = record.ticket_trail.iter().collect();
    ensure!(record.ticket_trail.len() == 2 && distinct.len() == 2, "tickets {:?}", record.ticket_trail);
    // the need_info asked for the role claim
    let world = &run.world;
    let seen = Mutex::new(Vec::<ClaimRequirement>::new());
    let vc = shoe_seller(world);
    let provider = |req: &[ClaimRequirement]| {
        seen.lock().unwrap().extend_from_slice(req);
        if req.is_empty() {
            Vec::new()
        } else {
            vec![vc.clone()]
        }
    };
    let outcome = access(world, Method::GET, SHOE_SIZE, &provider).map_err(|e| e.to_string())?;
    ensure!(outcome.response.status() == StatusCode::OK, "replay {}", outcome.response.status());
    let seen = seen.into_inner().unwrap();
    ensure!(seen.len() == 1 && seen[0].claim_type.starts_with("role"), "required {seen:?}");
    ensure!(elapsed <= std::time::Duration::from_secs(5), "took {elapsed:?}");
    Ok(())
}

/// Production sources of the authorization server, test modules removed.
fn authz_sources() -> Vec<(String, String)> {
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("../authz/src");
    let mut out = Vec::new();
    for entry in std::fs::read_dir(src).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let production = text.split("#[cfg(test)]").next().unwrap().to_owned();
        out.push((path.file_name().unwrap().to_string_lossy().into_owned(), production));
    }
    out
}

fn flexible_authentication(_: &Shared) -> Result<(), String> {
    let world = world_at(birthday());
    let vc = shoe_seller(&world);
    ensure!(vc.format == umax_core::vocab::formats::VC_JWT, "credential format {}", vc.format);
    let shoe = access(&world, Method::GET, SHOE_SIZE, &wallet(vec![vc])).map_err(|e| e.to_string())?;
    ensure!(shoe.response.status() == StatusCode::OK, "VC grant: {}", shoe.response.status());

    world.clock.advance(Duration::days(3));
    let oidc = favorite(&world);
    ensure!(oidc.format == umax_core::vocab::formats::OIDC_ID_TOKEN, "credential format {}", oidc.format);
    let card = access(&world, Method::POST, "/alice/inbox/", &wallet(vec![oidc])).map_err(|e| e.to_string())?;
    ensure!(card.response.status() == StatusCode::CREATED, "OIDC grant: {}", card.response.status());

    let forbidden = ["formats::", "OIDC_ID_TOKEN", "VC_JWT", "umax_claims::issue", "id_token", "vc_token", "openid"];
    for (file, text) in authz_sources() {
        for needle in forbidden {
            ensure!(!text.contains(needle), "authorization server source {file} mentions `{needle}`");
        }
    }
    let manifest = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../authz/Cargo.toml")).unwrap();
    ensure!(manifest.contains("umax-claims"), "authorization server must verify claims through the claims crate");
    Ok(())
}

fn expressive_policies(_: &Shared) -> Result<(), String> {
    let agreed = AtomicUsize::new(0);
    let mut runner = TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });
    runner
        .run(&arb_instance(), |inst| {
            prop_assert!(inst.policies.len() <= 5);
            for p in &inst.policies {
                let rules = p.permissions().len() + p.prohibitions().len();
                prop_assert!(rules <= 3);
                prop_assert!(p.permissions().iter().chain(p.prohibitions()).all(|r| r.constraints.len() <= 2));
            }
            let fast = evaluate(&inst.request, &inst.claims, &inst.policies, inst.now);
            let slow = brute_force_evaluate(&inst.request, &inst.claims, &inst.policies, inst.now);
            prop_assert_eq!(fast, slow);
            agreed.fetch_add(1, Ordering::SeqCst);
            Ok(())
        })
        .map_err(|e| format!("oracle disagreement: {e}"))?;
    let agreed = agreed.load(Ordering::SeqCst);
    ensure!(agreed >= 1000, "only {agreed} instances checked");

    let world = world_at(birthday() + Duration::days(3));
    let oidc = wallet(vec![favorite(&world)]);
    let granted = access(&world, Method::POST, "/alice/inbox/", &oidc).map_err(|e| e.to_string())?;
    ensure!(granted.response.status() == StatusCode::CREATED, "birthday+3d: {}", granted.response.status());
    world.clock.advance(Duration::days(7));
    match access(&world, Method::POST, "/alice/inbox/", &oidc) {
        Err(AccessError::Denied) => Ok(()),
        other => Err(format!("birthday+10d: {other:?}")),
    }
}

fn ticketless_requests(_: &Shared) -> Result<(), String> {
    let world = world_at(birthday() + Duration::days(3));
    let tokens = vec![favorite(&world)];
    let purpose = "https://purposes.example/birthday-greeting";
    let direct = world
        .client
        .request_direct(
            AS_ORIGIN,
            vec![PermissionDescriptor::for_type(INBOX_TYPE, vec![Scope::Append]).with_purpose(purpose)],
            tokens.clone(),
        )
        .map_err(|e| e.to_string())?;
    let pairs = |perms: &[ResourcePermission]| -> BTreeSet<(String, Scope)> {
        perms.iter().flat_map(|p| p.resource_scopes.iter().map(|s| (p.resource_id.clone(), *s))).collect()
    };
    let inboxes: Vec<String> = world
        .authz
        .registrations()
        .into_iter()
        .filter(|r| r.resource_type.as_deref() == Some(INBOX_TYPE))
        .map(|r| r.resource_id)
        .collect();
    ensure!(inboxes.len() == 2, "inboxes {inboxes:?}");
    let mut union = BTreeSet::new();
    for iri in &inboxes {
        let path = iri.strip_prefix(RS_ORIGIN).unwrap();
        let record = access(&world, Method::POST, path, &wallet(tokens.clone()))
            .map_err(|e| e.to_string())?
            .audit
            .ok_or("ticketed flow produced no grant")?;
        union.extend(pairs(&record.permissions));
    }
    ensure!(pairs(&direct.permissions) == union, "direct {:?} vs ticketed {union:?}", pairs(&direct.permissions));
    Ok(())
}

/// Constraints of every non-public permission rule whose target and action
/// cover a granted pair.
fn granting_constraints(
    policies: &[PolicyDocument],
    types: &BTreeMap<String, Option<String>>,
    perms: &[ResourcePermission],
) -> BTreeSet<UsageRequirement> {
    let mut out = BTreeSet::new();
    for p in perms {
        for scope in &p.resource_scopes {
            for rule in policies.iter().flat_map(|d| d.permissions()) {
                let target = match &rule.target {
                    TargetMatcher::Resource(r) => *r == p.resource_id,
                    TargetMatcher::ResourcePrefix(prefix) => p.resource_id.starts_with(prefix.as_str()),
                    TargetMatcher::ResourceType(t) => {
                        types.get(&p.resource_id).cloned().flatten().as_deref() == Some(t)
                    }
                };
                let party = !matches!(rule.assignee, PartyMatcher::Anyone);
                if target && rule.action == *scope && party {
                    out.extend(rule.constraints.iter().cloned().map(UsageRequirement::from));
                }
            }
        }
    }
    out
}

fn auditability(_: &Shared) -> Result<(), String> {
    let mut checked = 0;
    for name in ["shoe-size", "birthday-card"] {
        let run = scenario(name);
        ensure!(run.transcript.passed(), "{name} assertions failed");
        let world = &run.world;
        let keys = world.authz.key_set();
        let policies = world.authz.policies();
        let types: BTreeMap<String, Option<String>> =
            world.authz.registrations().into_iter().map(|r| (r.resource_id, r.resource_type)).collect();
        let records = &run.transcript.audit;
        ensure!(!records.is_empty(), "{name}: no grants");
        let latest_exp = records
            .iter()
            .map(|r| verify_audit(r, &keys).map(|rep| rep.window.map(|w| w.1)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?
            .into_iter()
            .flatten()
            .max()
            .ok_or("no verifiable window")?;
        world.clock.set(latest_exp + Duration::seconds(1));
        for r in records {
            let stored: BTreeSet<UsageRequirement> = r.usage_requirements.iter().cloned().collect();
            let expected = granting_constraints(&policies, &types, &r.permissions);
            ensure!(stored == expected, "{name}: usage {stored:?} vs rules {expected:?}");
            let expired = verify_token(&r.access_token, &keys, world.clock.now());
            ensure!(expired == Err(TokenError::Expired), "{name}: token still current: {expired:?}");
            let report = verify_audit(r, &keys).map_err(|e| e.to_string())?;
            ensure!(report.is_sound(), "{name}: {report:?}");
            checked += 1;
        }
    }
    // the birthday grants carry the window constraint
    let window = TemporalWindow::new(
        DateTime::parse_from_rfc3339("2026-06-08T00:00:00Z").unwrap().with_timezone(&Utc),
        DateTime::parse_from_rfc3339("2026-06-22T00:00:00Z").unwrap().with_timezone(&Utc),
    )
    .unwrap();
    let birthday_run = scenario("birthday-card");
    ensure!(
        birthday_run
            .transcript
            .audit
            .iter()
            .all(|r| r.usage_requirements == vec![UsageRequirement::from(Constraint::Window(window))]),
        "birthday usage {:?}",
        birthday_run.transcript.audit.iter().map(|r| &r.usage_requirements).collect::<Vec<_>>()
    );
    ensure!(checked >= 3, "only {checked} records");
    Ok(())
}

/// Workspace crates reachable from `name` through path dependencies of the
/// given manifest sections.
fn path_closure(name: &str, sections: &[&str]) -> BTreeSet<String> {
    let crates = Path::new(env!("CARGO_MANIFEST_DIR")).join("..");
    let dir_of = |pkg: &str| -> std::path::PathBuf {
        for entry in std::fs::read_dir(&crates).unwrap() {
            let dir = entry.unwrap().path();
            if let Ok(text) = std::fs::read_to_string(dir.join("Cargo.toml")) {
                if text.contains(&format!("name = \"{pkg}\"")) {
                    return dir;
                }
            }
        }
        panic!("crate {pkg} not found")
    };
    let mut seen = BTreeSet::new();
    let mut todo = vec![name.to_owned()];
    while let Some(pkg) = todo.pop() {
        let manifest = std::fs::read_to_string(dir_of(&pkg).join("Cargo.toml")).unwrap();
        let mut section = String::new();
        for line in manifest.lines() {
            let line = line.trim();
            if line.starts_with('[') {
                section = line.trim_matches(|c| c == '[' || c == ']').to_owned();
                continue;
            }
            if sections.contains(&section.as_str()) && line.contains("path =") {
                let dep = line.split('=').next().unwrap().trim().to_owned();
                if seen.insert(dep.clone()) {
                    todo.push(dep);
                }
            }
        }
    }
    seen
}

fn separation(shared: &Shared) -> Result<(), String> {
    let d = shared.deployment.as_ref().map_err(|e| e.clone())?;
    ensure!(d.as_origin != d.rs_origin, "origins coincide");
    let vc = d.shoe_seller_file();
    let out = d.umax(&["access", &format!("{}/alice/profile/shoe-size", d.rs_origin), "--claim", &format!("{vc}:vc")]);
    ensure!(
        out.status.code() == Some(0),
        "cross-process access exited {:?}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    ensure!(out.stdout == b"43", "body {:?}", String::from_utf8_lossy(&out.stdout));

    let build = path_closure("umax-rs", &["dependencies", "build-dependencies"]);
    ensure!(!build.contains("umax-policy"), "resource server build graph includes policy engine: {build:?}");
    ensure!(!build.contains("umax-authz"), "resource server build graph includes authorization server: {build:?}");
    // its test suite can only run against the stub: the real AS is not even a dev dependency
    let dev = path_closure("umax-rs", &["dependencies", "build-dependencies", "dev-dependencies"]);
    ensure!(!dev.contains("umax-authz") && !dev.contains("umax-policy"), "resource server tests reach {dev:?}");
    let stub =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../rs/tests/common/mod.rs")).unwrap();
    ensure!(stub.contains("impl Transport for StubAs"), "resource server tests lack the scripted stub");
    Ok(())
}

fn public_resources(shared: &Shared) -> Result<(), String> {
    let run = scenario("public-card");
    ensure!(run.transcript.passed(), "scenario assertions failed");
    let access_step: Vec<_> = {
        let ex = &run.transcript.exchanges;
        let first = ex.iter().position(|e| e.from == CLIENT).ok_or("no client exchange")?;
        ex[first..].to_vec()
    };
    let rs_to_as: Vec<_> = access_step.iter().filter(|e| e.from == RS && e.to == AS_ORIGIN).collect();
    let client_to_as = access_step.iter().filter(|e| e.from == CLIENT && e.to == AS_ORIGIN).count();
    ensure!(rs_to_as.len() == 1, "rs->as {rs_to_as:?}");
    ensure!(
        rs_to_as[0].path == PERMISSION_PATH && rs_to_as[0].status == Some(200),
        "permission endpoint {:?}",
        rs_to_as[0]
    );
    ensure!(client_to_as == 0, "client->as {client_to_as}");
    ensure!(run.transcript.audit.is_empty(), "public access produced a grant");

    let d = shared.deployment.as_ref().map_err(|e| e.clone())?;
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let mut response = agent.get(&format!("{}{CARD}", d.rs_origin)).call().map_err(|e| e.to_string())?;
    ensure!(response.status() == 200, "plain GET {}", response.status());
    let body = response.body_mut().read_to_vec().map_err(|e| e.to_string())?;
    let expected = std::fs::read(fixtures().join("pod/alice/public/card.png")).unwrap();
    ensure!(body == expected, "plain GET body differs");
    Ok(())
}

fn signed_permission_request(world: &World, key: &SigningKeyPair, created: DateTime<Utc>) -> umax_core::HttpRequest {
    let body = PermissionRequest { resource_id: world.url(SHOE_SIZE), resource_scopes: vec![Scope::Read] };
    let mut req = json_request(Method::POST, &format!("{AS_ORIGIN}{PERMISSION_PATH}"), &body);
    sign_http_message(&mut req, key, created);
    req
}

fn signed_requests(_: &Shared) -> Result<(), String> {
    let world = world_at(birthday());
    let now = world.clock.now();
    let rs_key = party_key(RS);
    let genuine = world.authz.handle(signed_permission_request(&world, &rs_key, now));
    ensure!(genuine.status() == StatusCode::CREATED, "genuine request: {}", genuine.status());

    let status = |req| world.authz.handle(req).status();
    // tampered body: every variant independently rejected
    let original = signed_permission_request(&world, &rs_key, now).into_body();
    for i in [0, original.len() / 2, original.len() - 1] {
        let mut req = signed_permission_request(&world, &rs_key, now);
        req.body_mut()[i] ^= 0x01;
        ensure!(status(req) == StatusCode::UNAUTHORIZED, "tampered byte {i} accepted");
    }
    let mut swapped = signed_permission_request(&world, &rs_key, now);
    *swapped.body_mut() =
        serde_json::to_vec(&PermissionRequest { resource_id: world.url(CARD), resource_scopes: vec![Scope::Read] })
            .unwrap();
    ensure!(status(swapped) == StatusCode::UNAUTHORIZED, "swapped body accepted");

    // stale: older than 120 s
    let stale = signed_permission_request(&world, &rs_key, now - Duration::seconds(121));
    ensure!(status(stale) == StatusCode::UNAUTHORIZED, "stale signature accepted");
    let edge = signed_permission_request(&world, &rs_key, now - Duration::seconds(120));
    ensure!(status(edge) == StatusCode::CREATED, "signature at the 120 s edge rejected");

    // unlisted keys: a foreign kid, and a foreign key reusing the listed kid
    let intruder = signed_permission_request(&world, &party_key("intruder"), now);
    ensure!(status(intruder) == StatusCode::UNAUTHORIZED, "unlisted kid accepted");
    let impostor = signed_permission_request(&world, &SigningKeyPair::from_seed(RS, [7u8; 32]), now);
    ensure!(status(impostor) == StatusCode::UNAUTHORIZED, "unlisted key under listed kid accepted");
    Ok(())
}

fn token_form(req: &TokenRequest) -> umax_core::HttpRequest {
    let form = req.to_form();
    let pairs: Vec<(&str, &str)> = form.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
    form_request(&format!("{AS_ORIGIN}{TOKEN_PATH}"), &pairs)
}

fn challenge_ticket(world: &World, path: &str) -> Result<String, String> {
    let bare =
        world.network.endpoint(CLIENT).send(empty_request(Method::GET, &world.url(path))).map_err(|e| e.to_string())?;
    let header = header_str(bare.headers(), header::WWW_AUTHENTICATE).ok_or("no challenge")?;
    UmaChallenge::parse(header).map_err(|e| e.to_string())?.ticket.ok_or_else(|| "no ticket".into())
}

fn protocol_safety(_: &Shared) -> Result<(), String> {
    // single use
    let world = world_at(birthday());
    let ticket = challenge_ticket(&world, SHOE_SIZE)?;
    let request = TokenRequest::ticketed(ticket, vec![shoe_seller(&world)]);
    let first = world.authz.handle(token_form(&request));
    ensure!(first.status() == StatusCode::OK, "first presentation {}", first.status());
    let replay = world.authz.handle(token_form(&request));
    let code = parse_json::<ErrorBody>(replay.body()).map(|b| b.error).unwrap_or_default();
    ensure!(code == "invalid_grant", "replay answered {} {code}", replay.status());

    // negotiation bound, client side against an adversarial AS
    let stub = Arc::new(EndlessNeedInfo::default());
    let network = stub_network(stub.clone());
    let client = UmaClient::new(network.endpoint(CLIENT), Arc::new(ManualClock::new(birthday())));
    let err = client.access(Method::GET, &format!("{STUB_RS}/x"), HeaderMap::new(), Vec::new(), &hint_echo);
    ensure!(matches!(err, Err(AccessError::RoundsExhausted(5))), "client against endless need_info: {err:?}");
    ensure!(stub.token_calls.load(Ordering::SeqCst) == 5, "token calls {}", stub.token_calls.load(Ordering::SeqCst));
    // and server side: the sixth presentation is refused
    let mut ticket = challenge_ticket(&world, SHOE_SIZE)?;
    for round in 1..=6 {
        let answer = world.authz.handle(token_form(&TokenRequest::ticketed(ticket.clone(), vec![])));
        let body: serde_json::Value = serde_json::from_slice(answer.body()).unwrap();
        if round <= 5 {
            ensure!(body["error"] == "need_info", "round {round}: {body}");
            ticket = body["ticket"].as_str().unwrap().to_owned();
        } else {
            ensure!(body["error"] == "too_many_rounds", "round {round}: {body}");
        }
    }

    // deny by default
    let empty =
        World::start(birthday(), vec![], Store::load(&fixtures().join("pod")).unwrap()).map_err(|e| e.to_string())?;
    let everything = wallet(vec![shoe_seller(&empty), favorite(&empty)]);
    let paths: Vec<String> = empty.authz.registrations().into_iter().map(|r| r.resource_id).collect();
    ensure!(paths.len() >= 6, "registered {paths:?}");
    for iri in &paths {
        let path = iri.strip_prefix(RS_ORIGIN).unwrap();
        for method in [Method::GET, Method::POST, Method::PUT, Method::DELETE] {
            match access(&empty, method.clone(), path, &everything) {
                Err(AccessError::Denied) => {}
                other => return Err(format!("{method} {path} without policies: {other:?}")),
            }
        }
    }

    // scope fidelity
    let grant = access(&world, Method::GET, SHOE_SIZE, &wallet(vec![shoe_seller(&world)]))
        .map_err(|e| e.to_string())?
        .audit
        .ok_or("no grant")?;
    let bearer = |method: Method, path: &str| {
        let mut req = empty_request(method, &world.url(path));
        req.headers_mut().insert(header::AUTHORIZATION, format!("Bearer {}", grant.access_token).parse().unwrap());
        world.rs.handle(req).status()
    };
    ensure!(bearer(Method::GET, SHOE_SIZE) == StatusCode::OK, "token does not cover its own grant");
    ensure!(bearer(Method::GET, "/alice/inbox/README.txt") == StatusCode::FORBIDDEN, "cross-resource use allowed");
    ensure!(bearer(Method::PUT, SHOE_SIZE) == StatusCode::FORBIDDEN, "cross-scope use allowed");
    ensure!(bearer(Method::DELETE, SHOE_SIZE) == StatusCode::FORBIDDEN, "cross-scope delete allowed");
    Ok(())
}

fn arb_claims() -> impl Strategy<Value = AccessTokenClaims> {
    let perm = ("[a-z]{1,12}", prop::sample::subsequence(Scope::ALL.to_vec(), 1..=4)).prop_map(|(p, scopes)| {
        ResourcePermission { resource_id: format!("https://pod.example/{p}"), resource_scopes: scopes }
    });
    let usage = prop_oneof![
        "[a-z:/.]{1,20}".prop_map(|p| UsageRequirement::from(Constraint::Purpose(p))),
        (0i64..1_000_000, 1i64..1_000_000).prop_map(|(a, len)| {
            let start = DateTime::<Utc>::from_timestamp(1_700_000_000 + a, 0).unwrap();
            UsageRequirement::from(Constraint::Window(
                TemporalWindow::new(start, start + Duration::seconds(len)).unwrap(),
            ))
        }),
    ];
    (
        "\\PC{0,24}",
        "[a-z0-9]{1,16}",
        1_600_000_000i64..1_900_000_000,
        1i64..100_000,
        prop::collection::vec(perm, 0..4),
        prop::collection::vec(usage, 0..3),
    )
        .prop_map(|(sub, jti, iat, ttl, permissions, usage)| AccessTokenClaims {
            iss: "https://as.example".into(),
            sub,
            aud: "https://pod.example".into(),
            iat,
            exp: iat + ttl,
            jti,
            permissions,
            usage,
        })
}

fn token_correctness(_: &Shared) -> Result<(), String> {
    let key = party_key("token-check");
    let keys = key.key_set();
    let at = |secs: i64| DateTime::<Utc>::from_timestamp(secs, 0).unwrap();
    let cases = AtomicUsize::new(0);
    let mut runner = TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });
    runner
        .run(&arb_claims(), |claims| {
            let token = mint_token(&claims, &key).unwrap();
            prop_assert_eq!(verify_token(&token, &keys, at(claims.iat)), Ok(claims.clone()));
            prop_assert_eq!(verify_token(&token, &keys, at(claims.exp - 1)), Ok(claims.clone()));
            prop_assert_eq!(verify_token(&token, &keys, at(claims.exp)), Err(TokenError::Expired));
            prop_assert_eq!(verify_token(&token, &keys, at(claims.iat - 1)), Err(TokenError::NotYetValid));
            cases.fetch_add(1, Ordering::SeqCst);
            Ok(())
        })
        .map_err(|e| format!("roundtrip: {e}"))?;
    ensure!(cases.load(Ordering::SeqCst) >= 1000, "roundtrip cases {}", cases.load(Ordering::SeqCst));

    const ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_.";
    let flips = AtomicUsize::new(0);
    let mut runner = TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });
    runner
        .run(&(arb_claims(), any::<prop::sample::Index>(), 1usize..ALPHABET.len()), |(claims, pos, shift)| {
            let token = mint_token(&claims, &key).unwrap();
            let mut bytes = token.into_bytes();
            let i = pos.index(bytes.len());
            let current = ALPHABET.iter().position(|c| *c == bytes[i]).unwrap();
            bytes[i] = ALPHABET[(current + shift) % ALPHABET.len()];
            let tampered = String::from_utf8(bytes).unwrap();
            prop_assert!(verify_token(&tampered, &keys, at(claims.iat)).is_err(), "flip at {} accepted", i);
            flips.fetch_add(1, Ordering::SeqCst);
            Ok(())
        })
        .map_err(|e| format!("tamper: {e}"))?;
    ensure!(flips.load(Ordering::SeqCst) >= 1000, "tamper cases {}", flips.load(Ordering::SeqCst));
    Ok(())
}
