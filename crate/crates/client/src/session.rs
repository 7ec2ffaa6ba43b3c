use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use http::{header, HeaderMap, Method, StatusCode};
use umax_authz::TokenRequest;
use umax_core::net::{empty_request, form_request, header_str, origin_of, parse_json};
use umax_core::uma::{
    AsConfiguration, ErrorBody, GrantBody, NeedInfoBody, PermissionDescriptor, UmaChallenge, UMA_CONFIGURATION_PATH,
};
use umax_core::{ClaimRequirement, ClaimToken, Clock, HttpRequest, HttpResponse, Transport};

use crate::audit::{AuditError, AuditLog, AuditRecord};
use crate::provider::ClaimsProvider;

pub const DEFAULT_MAX_ROUNDS: u32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum AccessError {
    #[error("authorization denied")]
    Denied,
    #[error("no claim tokens available for {0:?}")]
    ClaimsUnavailable(Vec<ClaimRequirement>),
    #[error("negotiation exhausted after {0} rounds")]
    RoundsExhausted(u32),
    #[error("authorization server unreachable: {0}")]
    AsUnreachable(String),
    #[error("resource server unreachable: {0}")]
    RsUnreachable(String),
    #[error("malformed challenge: {0}")]
    ChallengeMalformed(String),
    /// Claims were missing from a single-shot ticketless request.
    #[error("claims required: {:?}", .0.required_claims)]
    NeedInfo(NeedInfoBody),
    /// Any other token endpoint error, as the server reported it.
    #[error("token endpoint answered {status}: {}", .body.error)]
    Token { status: u16, body: ErrorBody },
    #[error(transparent)]
    Audit(#[from] AuditError),
}

/// Result of [`UmaClient::access`]. `audit` is absent when no token was
/// needed.
#[derive(Debug)]
pub struct AccessOutcome {
    pub response: HttpResponse,
    pub audit: Option<AuditRecord>,
}

/// UMA client. Sessions share the discovery cache and audit log only; each
/// negotiation keeps its tickets to itself.
pub struct UmaClient {
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    audit: Option<AuditLog>,
    max_rounds: u32,
    discovery: Mutex<HashMap<String, AsConfiguration>>,
}

impl UmaClient {
    pub fn new(transport: Arc<dyn Transport>, clock: Arc<dyn Clock>) -> Self {
        Self { transport, clock, audit: None, max_rounds: DEFAULT_MAX_ROUNDS, discovery: Mutex::default() }
    }

    pub fn with_audit_log(mut self, log: AuditLog) -> Self {
        self.audit = Some(log);
        self
    }

    pub fn with_max_rounds(mut self, rounds: u32) -> Self {
        self.max_rounds = rounds;
        self
    }

    pub fn audit_log(&self) -> Option<&AuditLog> {
        self.audit.as_ref()
    }

    /// Requests `url`; on a UMA challenge negotiates a token, then repeats
    /// the request with it.
    ///
    /// The provider is first asked with no requirements, then once per
    /// `need_info` with all outstanding requirements. Claim tokens
    /// accumulate and must strictly grow between rounds. At most
    /// `max_rounds` `need_info` answers are accepted.
    pub fn access(
        &self,
        method: Method,
        url: &str,
        headers: HeaderMap,
        body: Vec<u8>,
        provider: &dyn ClaimsProvider,
    ) -> Result<AccessOutcome, AccessError> {
        let build = |bearer: Option<&str>| {
            let mut req = http::Request::builder()
                .method(method.clone())
                .uri(url)
                .body(body.clone())
                .map_err(|e| AccessError::RsUnreachable(e.to_string()))?;
            req.headers_mut().extend(headers.clone());
            if let Some(token) = bearer {
                let value = format!("Bearer {token}").parse().map_err(|_| AccessError::Token {
                    status: 200,
                    body: ErrorBody::new("invalid_token", Some("token is not header-safe".to_owned())),
                })?;
                req.headers_mut().insert(header::AUTHORIZATION, value);
            }
            Ok::<_, AccessError>(req)
        };
        let send_rs =
            |req: HttpRequest| self.transport.send(req).map_err(|e| AccessError::RsUnreachable(e.to_string()));

        let response = send_rs(build(None)?)?;
        if response.status() != StatusCode::UNAUTHORIZED {
            return Ok(AccessOutcome { response, audit: None });
        }
        let challenge = header_str(response.headers(), header::WWW_AUTHENTICATE)
            .ok_or_else(|| AccessError::ChallengeMalformed("401 without WWW-Authenticate".into()))
            .and_then(|v| UmaChallenge::parse(v).map_err(|e| AccessError::ChallengeMalformed(e.to_string())))?;
        let Some(mut ticket) = challenge.ticket else {
            return Ok(AccessOutcome { response, audit: None });
        };
        let config = self.discover(&challenge.as_uri)?;

        let mut sent: Vec<ClaimToken> = Vec::new();
        merge(&mut sent, provider.provide(&[]));
        let mut trail = Vec::new();
        let mut rounds = 0;
        let grant = loop {
            trail.push(ticket.clone());
            match self.token_call(&config, &TokenRequest::ticketed(ticket.clone(), sent.clone()))? {
                TokenAnswer::Granted(grant) => break grant,
                TokenAnswer::NeedInfo(info) => {
                    rounds += 1;
                    if rounds >= self.max_rounds {
                        return Err(AccessError::RoundsExhausted(rounds));
                    }
                    if !merge(&mut sent, provider.provide(&info.required_claims)) {
                        return Err(AccessError::ClaimsUnavailable(info.required_claims));
                    }
                    ticket = info.ticket;
                }
            }
        };

        let rs_origin = origin_of(url).unwrap_or_default();
        let record = self.retain(&config, rs_origin, &grant, trail)?;
        let response = send_rs(build(Some(&grant.access_token))?)?;
        Ok(AccessOutcome { response, audit: Some(record) })
    }

    /// One ticketless token request naming the wanted permissions up front.
    pub fn request_direct(
        &self,
        as_uri: &str,
        permissions: Vec<PermissionDescriptor>,
        tokens: Vec<ClaimToken>,
    ) -> Result<AuditRecord, AccessError> {
        let config = self.discover(as_uri)?;
        match self.token_call(&config, &TokenRequest::ticketless(permissions, tokens))? {
            TokenAnswer::Granted(grant) => {
                let rs_origin = grant.permissions.first().and_then(|p| origin_of(&p.resource_id)).unwrap_or_default();
                self.retain(&config, rs_origin, &grant, Vec::new())
            }
            TokenAnswer::NeedInfo(info) => Err(AccessError::NeedInfo(info)),
        }
    }

    /// Discovery documents are cached per authorization server.
    pub fn discover(&self, as_uri: &str) -> Result<AsConfiguration, AccessError> {
        let as_uri = as_uri.trim_end_matches('/');
        if let Some(c) = self.discovery.lock().unwrap().get(as_uri) {
            return Ok(c.clone());
        }
        let unreachable = |e: String| AccessError::AsUnreachable(e);
        let response = self
            .transport
            .send(empty_request(Method::GET, &format!("{as_uri}{UMA_CONFIGURATION_PATH}")))
            .map_err(|e| unreachable(e.to_string()))?;
        if response.status() != StatusCode::OK {
            return Err(unreachable(format!("discovery answered {}", response.status())));
        }
        let config: AsConfiguration = parse_json(response.body()).map_err(|e| unreachable(e.to_string()))?;
        if config.issuer != as_uri {
            return Err(unreachable(format!("discovery names issuer `{}`", config.issuer)));
        }
        self.discovery.lock().unwrap().insert(as_uri.to_owned(), config.clone());
        Ok(config)
    }

    fn token_call(&self, config: &AsConfiguration, request: &TokenRequest) -> Result<TokenAnswer, AccessError> {
        let form = request.to_form();
        let pairs: Vec<(&str, &str)> = form.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        let response = self
            .transport
            .send(form_request(&config.token_endpoint, &pairs))
            .map_err(|e| AccessError::AsUnreachable(e.to_string()))?;
        let status = response.status();
        let malformed = |e: serde_json::Error| AccessError::Token {
            status: status.as_u16(),
            body: ErrorBody::new("invalid_response", Some(e.to_string())),
        };
        if status == StatusCode::OK {
            return parse_json(response.body()).map(TokenAnswer::Granted).map_err(malformed);
        }
        let body: ErrorBody = parse_json(response.body()).map_err(malformed)?;
        match body.error.as_str() {
            "need_info" => parse_json(response.body()).map(TokenAnswer::NeedInfo).map_err(malformed),
            "request_denied" => Err(AccessError::Denied),
            "too_many_rounds" => Err(AccessError::RoundsExhausted(self.max_rounds)),
            _ => Err(AccessError::Token { status: status.as_u16(), body }),
        }
    }

    fn retain(
        &self,
        config: &AsConfiguration,
        rs_origin: String,
        grant: &GrantBody,
        ticket_trail: Vec<String>,
    ) -> Result<AuditRecord, AccessError> {
        let record = AuditRecord {
            obtained_at: self.clock.now(),
            as_issuer: config.issuer.clone(),
            rs_origin,
            access_token: grant.access_token.clone(),
            permissions: grant.permissions.clone(),
            usage_requirements: grant.usage_requirements.clone(),
            ticket_trail,
        };
        if let Some(log) = &self.audit {
            log.append(&record)?;
        }
        Ok(record)
    }
}

enum TokenAnswer {
    Granted(GrantBody),
    NeedInfo(NeedInfoBody),
}

/// Adds tokens not yet in `sent`; true when anything was added.
fn merge(sent: &mut Vec<ClaimToken>, offered: Vec<ClaimToken>) -> bool {
    let before = sent.len();
    for token in offered {
        if !sent.contains(&token) {
            sent.push(token);
        }
    }
    sent.len() > before
}
