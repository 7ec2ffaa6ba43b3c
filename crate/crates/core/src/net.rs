//! Synchronous HTTP abstraction.
//!
//! Parties are written as [`Service`]s that map a request to a response and
//! talk to each other through a [`Transport`]. The same code runs over an
//! in-process router (tests, scenario harness) and over real sockets (CLI).

use std::sync::Arc;

use http::{header, Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub type HttpRequest = http::Request<Vec<u8>>;
pub type HttpResponse = http::Response<Vec<u8>>;

pub trait Service: Send + Sync {
    fn handle(&self, request: HttpRequest) -> HttpResponse;
}

impl<S: Service + ?Sized> Service for Arc<S> {
    fn handle(&self, request: HttpRequest) -> HttpResponse {
        (**self).handle(request)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("host unreachable: {0}")]
    Unreachable(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport failure: {0}")]
    Io(String),
}

pub trait Transport: Send + Sync {
    fn send(&self, request: HttpRequest) -> Result<HttpResponse, TransportError>;
}

impl<T: Transport + ?Sized> Transport for Arc<T> {
    fn send(&self, request: HttpRequest) -> Result<HttpResponse, TransportError> {
        (**self).send(request)
    }
}

/// `scheme://host[:port]` of an absolute URI, with default ports elided.
pub fn origin_of(uri: &str) -> Option<String> {
    let parsed = url::Url::parse(uri).ok()?;
    match parsed.origin() {
        url::Origin::Tuple(..) => Some(parsed.origin().ascii_serialization()),
        url::Origin::Opaque(_) => None,
    }
}

pub fn json_response<T: Serialize>(status: StatusCode, body: &T) -> HttpResponse {
    let bytes = serde_json::to_vec(body).expect("serializable response body");
    http::Response::builder()
        .status(status)
        .header(header::CONTENT_TYPE, "application/json")
        .body(bytes)
        .expect("valid response")
}

pub fn empty_response(status: StatusCode) -> HttpResponse {
    http::Response::builder().status(status).body(Vec::new()).expect("valid response")
}

pub fn json_request<T: Serialize>(method: Method, uri: &str, body: &T) -> HttpRequest {
    http::Request::builder()
        .method(method)
        .uri(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(serde_json::to_vec(body).expect("serializable request body"))
        .expect("valid request")
}

pub fn empty_request(method: Method, uri: &str) -> HttpRequest {
    http::Request::builder().method(method).uri(uri).body(Vec::new()).expect("valid request")
}

pub fn form_request(uri: &str, pairs: &[(&str, &str)]) -> HttpRequest {
    let body = url::form_urlencoded::Serializer::new(String::new()).extend_pairs(pairs).finish();
    http::Request::builder()
        .method(Method::POST)
        .uri(uri)
        .header(header::CONTENT_TYPE, "application/x-www-form-urlencoded")
        .body(body.into_bytes())
        .expect("valid request")
}

/// Decoded `application/x-www-form-urlencoded` body, preserving repeated keys.
pub fn parse_form(body: &[u8]) -> Vec<(String, String)> {
    url::form_urlencoded::parse(body).into_owned().collect()
}

pub fn parse_json<T: DeserializeOwned>(body: &[u8]) -> Result<T, serde_json::Error> {
    serde_json::from_slice(body)
}

pub fn header_str(headers: &http::HeaderMap, name: impl http::header::AsHeaderName) -> Option<&str> {
    headers.get(name).and_then(|v| v.to_str().ok())
}
