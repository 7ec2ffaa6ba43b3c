use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use chrono::Duration;
use clap::{Args, Parser, Subcommand};
use http::{header, HeaderMap, HeaderValue, Method};
use umax_authz::{AsSettings, AuthorizationServer, RsAllowlist};
use umax_claims::issue::{id_token, vc_token};
use umax_claims::{resolve_trust, TrustedIssuer};
use umax_client::audit::{read_records, verify_audit, AuditLog};
use umax_client::harness::{run_scenario, Scenario, ScenarioError};
use umax_client::http::{serve, HttpTransport, Swappable};
use umax_client::provider::Wallet;
use umax_client::session::{AccessError, UmaClient};
use umax_core::security::keys::PrivateJwk;
use umax_core::security::{KeySetDocument, SigningKeyPair};
use umax_core::uma::PermissionDescriptor;
use umax_core::vocab::formats;
use umax_core::{ClaimToken, Clock, Scope, Service, SystemClock, Transport};
use umax_policy::load_policy_dir;
use umax_rs::{KeySetService, ResourceServer, RsSettings, Store};

/// Exit statuses shared by every subcommand.
mod exit {
    pub const OK: u8 = 0;
    /// Scenario assertion failed, audit record unsound, or the resource
    /// server answered with an error other than 401/403.
    pub const FAILED: u8 = 1;
    pub const DENIED: u8 = 2;
    pub const EXHAUSTED: u8 = 3;
    pub const USAGE: u8 = 4;
}

#[derive(Parser)]
#[command(name = "umax", version, about = "UMA authorization server, resource server and client")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an authorization server.
    ServeAs(ServeAs),
    /// Run a resource server backed by a directory.
    ServeRs(ServeRs),
    /// Fetch a resource, negotiating a token when challenged.
    Access(AccessArgs),
    /// Ask the authorization server for a token directly, without a ticket.
    Request(RequestArgs),
    /// Inspect stored audit records.
    #[command(subcommand)]
    Audit(AuditCommand),
    /// Run a scenario script in-process and print its transcript.
    Scenario {
        script: PathBuf,
        /// Print the full transcript as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Generate an Ed25519 key, written as a private JWK.
    Keygen {
        #[arg(long)]
        kid: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the public key set of a private JWK file.
    Jwks { key: PathBuf },
    /// Mint a claim token with an issuer key.
    #[command(subcommand)]
    Issue(IssueCommand),
}

#[derive(Args)]
struct ServeAs {
    #[arg(long)]
    bind: String,
    #[arg(long)]
    policies: PathBuf,
    #[arg(long)]
    key: PathBuf,
    /// JSON object mapping resource server origins to a key-set URI or an
    /// inline key set.
    #[arg(long)]
    rs_allowlist: PathBuf,
    /// JSON array of trusted claim token issuers.
    #[arg(long)]
    trust: Option<PathBuf>,
    /// Public origin; defaults to `http://<bound address>`.
    #[arg(long)]
    issuer: Option<String>,
    #[arg(long, default_value_t = 300)]
    ticket_ttl: i64,
    #[arg(long, default_value_t = 600)]
    token_ttl: i64,
    #[arg(long, default_value_t = 5)]
    max_rounds: u32,
}

#[derive(Args)]
struct ServeRs {
    #[arg(long)]
    bind: String,
    #[arg(long = "as")]
    as_uri: String,
    #[arg(long)]
    root: PathBuf,
    #[arg(long)]
    key: PathBuf,
    /// Public origin; defaults to `http://<bound address>`.
    #[arg(long)]
    origin: Option<String>,
}

#[derive(Args)]
struct ClaimArgs {
    /// `<file>:<format>`; format is a URI or `oidc` / `vc`.
    #[arg(long = "claim", value_name = "FILE:FORMAT")]
    claims: Vec<String>,
    #[arg(long)]
    audit_dir: Option<PathBuf>,
    /// Audit file name within the audit directory.
    #[arg(long, default_value = "default")]
    identity: String,
}

#[derive(Args)]
struct AccessArgs {
    url: String,
    #[arg(long, default_value = "GET")]
    method: String,
    /// Request body file.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    content_type: Option<String>,
    #[command(flatten)]
    claims: ClaimArgs,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("target").required(true).args(["resource", "resource_type"]))]
struct RequestArgs {
    #[arg(long = "as")]
    as_uri: String,
    #[arg(long)]
    resource: Option<String>,
    #[arg(long)]
    resource_type: Option<String>,
    #[arg(long = "scope", required = true)]
    scopes: Vec<Scope>,
    #[arg(long)]
    purpose: Option<String>,
    #[command(flatten)]
    claims: ClaimArgs,
}

#[derive(Subcommand)]
enum AuditCommand {
    List {
        records: PathBuf,
    },
    Verify {
        records: PathBuf,
        #[arg(long)]
        as_jwks: PathBuf,
    },
}

#[derive(Subcommand)]
enum IssueCommand {
    /// OpenID Connect ID token.
    Oidc {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        issuer: String,
        #[arg(long)]
        sub: String,
        #[arg(long)]
        webid: Option<String>,
        #[arg(long, default_value_t = 1)]
        valid_days: i64,
    },
    /// Signed credential carrying `name=value` claims.
    Vc {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        issuer: String,
        #[arg(long)]
        subject: String,
        #[arg(long = "claim", value_name = "NAME=VALUE", required = true)]
        claims: Vec<String>,
        #[arg(long, default_value_t = 365)]
        valid_days: i64,
    },
}

/// Failure carrying its exit status.
struct Fail(u8, String);

impl<E: std::fmt::Display> From<E> for Fail {
    fn from(e: E) -> Self {
        Fail(exit::USAGE, e.to_string())
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse().command) {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, message)) => {
            eprintln!("umax: {message}");
            ExitCode::from(code)
        }
    }
}

fn run(command: Command) -> Result<u8, Fail> {
    match command {
        Command::ServeAs(args) => serve_as(args),
        Command::ServeRs(args) => serve_rs(args),
        Command::Access(args) => access(args),
        Command::Request(args) => request(args),
        Command::Audit(cmd) => audit(cmd),
        Command::Scenario { script, json } => scenario(&script, json),
        Command::Keygen { kid, out } => {
            let key = SigningKeyPair::generate(kid);
            write_json(&out, &key.to_private_jwk())?;
            print_json(&key.key_set());
            Ok(exit::OK)
        }
        Command::Jwks { key } => {
            print_json(&load_key(&key)?.key_set());
            Ok(exit::OK)
        }
        Command::Issue(cmd) => {
            let now = SystemClock.now();
            let token = match cmd {
                IssueCommand::Oidc { key, issuer, sub, webid, valid_days } => {
                    id_token(&load_key(&key)?, &issuer, &sub, webid.as_deref(), now, Duration::days(valid_days))
                }
                IssueCommand::Vc { key, issuer, subject, claims, valid_days } => {
                    let claims = claims
                        .iter()
                        .map(|c| c.split_once('=').map(|(k, v)| (k.to_owned(), v.to_owned())))
                        .collect::<Option<BTreeMap<_, _>>>()
                        .ok_or_else(|| Fail(exit::USAGE, "claims must be NAME=VALUE".into()))?;
                    vc_token(&load_key(&key)?, &issuer, &subject, &claims, now, Duration::days(valid_days))
                }
            };
            println!("{}", token.raw);
            Ok(exit::OK)
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Fail> {
    let bytes = std::fs::read(path).map_err(|e| Fail(exit::USAGE, format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| Fail(exit::USAGE, format!("{}: {e}", path.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Fail> {
    let bytes = serde_json::to_vec_pretty(value)?;
    std::fs::write(path, bytes).map_err(|e| Fail(exit::USAGE, format!("{}: {e}", path.display())))
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn load_key(path: &Path) -> Result<SigningKeyPair, Fail> {
    let jwk: PrivateJwk = read_json(path)?;
    Ok(SigningKeyPair::from_private_jwk(&jwk)?)
}

fn runtime() -> Result<tokio::runtime::Runtime, Fail> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

/// Prints the listening URL on stdout once the server is ready.
fn announce(origin: &str) {
    println!("listening {origin}");
    let _ = std::io::stdout().flush();
}

fn serve_as(args: ServeAs) -> Result<u8, Fail> {
    let key = load_key(&args.key)?;
    let policies = load_policy_dir(&args.policies)?;
    let allowlist: RsAllowlist = read_json(&args.rs_allowlist)?;
    let transport: Arc<dyn Transport> = Arc::new(HttpTransport::default());
    let trust: Vec<TrustedIssuer> = match &args.trust {
        Some(path) => resolve_trust(read_json(path)?, &*transport)?,
        None => Vec::new(),
    };
    let rt = runtime()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&args.bind).await?;
        let issuer = args.issuer.unwrap_or_else(|| format!("http://{}", listener.local_addr().unwrap()));
        let mut settings = AsSettings::new(issuer);
        settings.ticket_ttl = Duration::seconds(args.ticket_ttl);
        settings.token_ttl = Duration::seconds(args.token_ttl);
        settings.max_rounds = args.max_rounds;
        let server = AuthorizationServer::new(settings, key, Arc::new(SystemClock))
            .with_policies(policies)
            .with_trust(trust)
            .with_rs_allowlist(allowlist)
            .with_transport(transport);
        tracing::info!(issuer = server.issuer(), "authorization server ready");
        announce(server.issuer());
        serve(listener, Arc::new(server)).await?;
        Ok(exit::OK)
    })
}

fn serve_rs(args: ServeRs) -> Result<u8, Fail> {
    let key = load_key(&args.key)?;
    let store = Store::open(&args.root)?;
    let rt = runtime()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&args.bind).await?;
        let origin = args.origin.unwrap_or_else(|| format!("http://{}", listener.local_addr().unwrap()));
        // the authorization server may fetch our keys while we register
        let service = Swappable::new(Arc::new(KeySetService(key.key_set())));
        let serving = tokio::spawn(serve(listener, service.clone() as Arc<dyn Service>));
        let settings = RsSettings::new(origin.clone(), args.as_uri.trim_end_matches('/'));
        let rs = tokio::task::spawn_blocking(move || {
            ResourceServer::start(settings, key, store, Arc::new(HttpTransport::default()), Arc::new(SystemClock))
        })
        .await??;
        service.replace(Arc::new(rs));
        tracing::info!(%origin, "resource server ready");
        announce(&origin);
        serving.await??;
        Ok(exit::OK)
    })
}

fn wallet(claims: &ClaimArgs) -> Result<Wallet, Fail> {
    let mut tokens = Vec::new();
    for arg in &claims.claims {
        let (file, format) =
            arg.split_once(':').ok_or_else(|| Fail(exit::USAGE, format!("`{arg}`: expected FILE:FORMAT")))?;
        let format = match format {
            "oidc" => formats::OIDC_ID_TOKEN,
            "vc" => formats::VC_JWT,
            other => other,
        };
        let raw = std::fs::read_to_string(file).map_err(|e| Fail(exit::USAGE, format!("{file}: {e}")))?;
        tokens.push(ClaimToken::new(format, raw.trim()));
    }
    Ok(Wallet::new(tokens))
}

fn client(claims: &ClaimArgs) -> Result<UmaClient, Fail> {
    let client = UmaClient::new(Arc::new(HttpTransport::default()), Arc::new(SystemClock));
    Ok(match &claims.audit_dir {
        Some(dir) => client.with_audit_log(AuditLog::open(dir, &claims.identity)?),
        None => client,
    })
}

fn access_failure(e: AccessError) -> Fail {
    let code = match e {
        AccessError::Denied | AccessError::ClaimsUnavailable(_) | AccessError::NeedInfo(_) => exit::DENIED,
        AccessError::Token { .. } => exit::DENIED,
        AccessError::RoundsExhausted(_) => exit::EXHAUSTED,
        _ => exit::USAGE,
    };
    Fail(code, e.to_string())
}

fn access(args: AccessArgs) -> Result<u8, Fail> {
    let method = Method::from_bytes(args.method.as_bytes())?;
    let body = match &args.data {
        Some(path) => std::fs::read(path).map_err(|e| Fail(exit::USAGE, format!("{}: {e}", path.display())))?,
        None => Vec::new(),
    };
    let mut headers = HeaderMap::new();
    if let Some(ct) = &args.content_type {
        headers.insert(header::CONTENT_TYPE, HeaderValue::from_str(ct)?);
    }
    let provider = wallet(&args.claims)?;
    let client = client(&args.claims)?;
    let outcome = client.access(method, &args.url, headers, body, &provider).map_err(access_failure)?;
    let status = outcome.response.status();
    eprintln!("{status}");
    if outcome.audit.is_some() {
        if let Some(log) = client.audit_log() {
            eprintln!("audit record appended to {}", log.path().display());
        }
    }
    std::io::stdout().write_all(outcome.response.body())?;
    Ok(match status.as_u16() {
        200..=299 => exit::OK,
        401 | 403 => exit::DENIED,
        _ => exit::FAILED,
    })
}

fn request(args: RequestArgs) -> Result<u8, Fail> {
    let descriptor = PermissionDescriptor {
        resource_id: args.resource.clone(),
        resource_type: args.resource_type.clone(),
        resource_scopes: args.scopes.clone(),
        purpose: args.purpose.clone(),
    };
    let tokens = wallet(&args.claims)?.tokens().to_vec();
    let record =
        client(&args.claims)?.request_direct(&args.as_uri, vec![descriptor], tokens).map_err(access_failure)?;
    print_json(&record);
    Ok(exit::OK)
}

fn audit(cmd: AuditCommand) -> Result<u8, Fail> {
    match cmd {
        AuditCommand::List { records } => {
            for r in read_records(&records)? {
                let perms: Vec<String> = r
                    .permissions
                    .iter()
                    .map(|p| {
                        let scopes: Vec<&str> = p.resource_scopes.iter().map(|s| s.as_str()).collect();
                        format!("{} [{}]", p.resource_id, scopes.join(","))
                    })
                    .collect();
                println!("{}  {}  {}", r.obtained_at.to_rfc3339(), r.as_issuer, perms.join("; "));
            }
            Ok(exit::OK)
        }
        AuditCommand::Verify { records, as_jwks } => {
            let keys: KeySetDocument = read_json(&as_jwks)?;
            let mut sound = true;
            for r in read_records(&records)? {
                let report = verify_audit(&r, &keys)?;
                sound &= report.is_sound();
                println!("{}", serde_json::to_string(&report)?);
            }
            Ok(if sound { exit::OK } else { exit::FAILED })
        }
    }
}

fn scenario(path: &Path, json: bool) -> Result<u8, Fail> {
    let (script, base) = Scenario::load(path)?;
    let run = run_scenario(&script, &base).map_err(|e: ScenarioError| Fail(exit::USAGE, e.to_string()))?;
    let t = &run.transcript;
    if json {
        print_json(t);
    } else {
        for e in &t.exchanges {
            let status = e.status.map_or("---".to_owned(), |s| s.to_string());
            let note = e.error.as_deref().map(|n| format!(" {n}")).unwrap_or_default();
            println!("{:<6} -> {:<20} {:<6} {} {status}{note}", e.from, e.to, e.method, e.path);
        }
        for s in &t.steps {
            let verdict = match (&s.failure, &s.outcome) {
                (Some(f), _) => format!("FAIL {f}"),
                (None, Some(o)) => format!("{o:?}"),
                (None, None) => "ok".into(),
            };
            println!("step {:>2} {:<16} {verdict}", s.index, s.step);
        }
    }
    Ok(if t.passed() { exit::OK } else { exit::FAILED })
}
