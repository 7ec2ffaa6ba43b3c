use http::{header, Method, StatusCode};
use umax_core::net::{empty_response, json_response, parse_form, parse_json};
use umax_core::uma::{
    ErrorBody, PermissionRequest, PublicHint, RegistrationCreated, ResourceDescription, TicketIssued,
    INTROSPECTION_PATH, JWKS_PATH, PERMISSION_PATH, REGISTRATION_PATH, TOKEN_PATH, UMA_CONFIGURATION_PATH,
};
use umax_core::{HttpRequest, HttpResponse, Service};

use crate::error::{GrantError, ProtectionError};
use crate::server::{AuthorizationServer, PermissionOutcome, TokenOutcome};
use crate::token::TokenRequest;

impl Service for AuthorizationServer {
    fn handle(&self, request: HttpRequest) -> HttpResponse {
        let request = absolutize(request, self.issuer());
        let path = request.uri().path().to_owned();
        let method = request.method().clone();
        match (method, path.as_str()) {
            (Method::GET, UMA_CONFIGURATION_PATH) => http::Response::builder()
                .status(StatusCode::OK)
                .header(header::CONTENT_TYPE, "application/json")
                .body(self.discovery_bytes().to_vec())
                .expect("valid response"),
            (Method::GET, JWKS_PATH) => json_response(StatusCode::OK, &self.key_set()),
            (Method::POST, TOKEN_PATH) => self.token_endpoint(&request),
            (Method::POST, PERMISSION_PATH) => protected(self, &request, |rs| self.permission_endpoint(rs, &request)),
            (Method::POST, INTROSPECTION_PATH) => protected(self, &request, |_| {
                let form = parse_form(request.body());
                let token = form.iter().find(|(k, _)| k == "token").map(|(_, v)| v.as_str()).unwrap_or("");
                Ok(json_response(StatusCode::OK, &self.introspect(token)))
            }),
            (_, p) if p.starts_with(REGISTRATION_PATH) => {
                let id = p[REGISTRATION_PATH.len()..].to_owned();
                protected(self, &request, |rs| self.registration_endpoint(rs, &id, &request))
            }
            _ => json_response(StatusCode::NOT_FOUND, &ErrorBody::new("not_found", None)),
        }
    }
}

impl AuthorizationServer {
    fn token_endpoint(&self, request: &HttpRequest) -> HttpResponse {
        let result = TokenRequest::from_form(&parse_form(request.body())).and_then(|r| self.handle_token_request(r));
        match result {
            Ok(TokenOutcome::Granted(grant)) => no_store(json_response(StatusCode::OK, &grant)),
            Ok(TokenOutcome::NeedInfo(body)) => no_store(json_response(StatusCode::FORBIDDEN, &body)),
            Err(e) => grant_error(&e),
        }
    }

    fn permission_endpoint(&self, rs: &str, request: &HttpRequest) -> Result<HttpResponse, ProtectionError> {
        let body: PermissionRequest =
            parse_json(request.body()).map_err(|e| ProtectionError::Malformed(e.to_string()))?;
        Ok(match self.create_permission(rs, body)? {
            PermissionOutcome::Public(public_scopes) => json_response(StatusCode::OK, &PublicHint { public_scopes }),
            PermissionOutcome::Ticket(ticket) => json_response(StatusCode::CREATED, &TicketIssued { ticket }),
        })
    }

    fn registration_endpoint(
        &self,
        rs: &str,
        id: &str,
        request: &HttpRequest,
    ) -> Result<HttpResponse, ProtectionError> {
        let description = || -> Result<ResourceDescription, ProtectionError> {
            parse_json(request.body()).map_err(|e| ProtectionError::Malformed(e.to_string()))
        };
        match (request.method().clone(), id.is_empty()) {
            (Method::POST, true) => {
                let id = self.register_resource(rs, description()?)?;
                Ok(json_response(StatusCode::CREATED, &RegistrationCreated { id }))
            }
            (Method::GET, true) => {
                let query = request.uri().query().unwrap_or("");
                match url::form_urlencoded::parse(query.as_bytes()).find(|(k, _)| k == "resource_id") {
                    Some((_, resource_id)) => {
                        let reg = self.find_resource(rs, &resource_id).ok_or(ProtectionError::NotFound)?;
                        Ok(json_response(StatusCode::OK, &RegistrationCreated { id: reg.id }))
                    }
                    None => Ok(json_response(StatusCode::OK, &self.list_resources(rs))),
                }
            }
            (Method::GET, false) => Ok(json_response(StatusCode::OK, &self.get_resource(rs, id)?.description())),
            (Method::PUT, false) => {
                self.update_resource(rs, id, description()?)?;
                Ok(json_response(StatusCode::OK, &RegistrationCreated { id: id.to_owned() }))
            }
            (Method::DELETE, false) => {
                self.delete_resource(rs, id)?;
                Ok(empty_response(StatusCode::NO_CONTENT))
            }
            _ => Ok(json_response(StatusCode::METHOD_NOT_ALLOWED, &ErrorBody::new("invalid_request", None))),
        }
    }
}

fn protected(
    server: &AuthorizationServer,
    request: &HttpRequest,
    op: impl FnOnce(&str) -> Result<HttpResponse, ProtectionError>,
) -> HttpResponse {
    match server.authenticate(request).and_then(|rs| op(&rs)) {
        Ok(resp) => resp,
        Err(e) => {
            let description = match &e {
                ProtectionError::Malformed(d) => Some(d.clone()),
                _ => None,
            };
            json_response(e.status(), &ErrorBody::new(e.code(), description))
        }
    }
}

fn grant_error(e: &GrantError) -> HttpResponse {
    no_store(json_response(e.status(), &ErrorBody::new(e.code(), e.public_description())))
}

fn no_store(mut resp: HttpResponse) -> HttpResponse {
    resp.headers_mut().insert(header::CACHE_CONTROL, header::HeaderValue::from_static("no-store"));
    resp
}

/// Signatures cover the absolute target URI, which servers see only as a
/// path; rebuild it from this server's own origin.
fn absolutize(mut request: HttpRequest, origin: &str) -> HttpRequest {
    if request.uri().scheme().is_none() {
        let pq = request.uri().path_and_query().map_or("/", |pq| pq.as_str());
        if let Ok(uri) = format!("{origin}{pq}").parse() {
            *request.uri_mut() = uri;
        }
    }
    request
}
