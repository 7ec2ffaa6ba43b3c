//! Socket adapters: any [`Service`] behind an axum listener, and a blocking
//! [`Transport`] over real HTTP.

use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::body::{to_bytes, Body};
use axum::extract::{Request, State};
use axum::response::{IntoResponse, Response};
use http::StatusCode;
use tokio::net::TcpListener;
use umax_core::{HttpRequest, HttpResponse, Service, Transport, TransportError};

/// Largest request body accepted by [`serve`].
pub const MAX_BODY_BYTES: usize = 8 * 1024 * 1024;

/// Service that can be replaced while a listener is serving it.
pub struct Swappable(RwLock<Arc<dyn Service>>);

impl Swappable {
    pub fn new(service: Arc<dyn Service>) -> Arc<Self> {
        Arc::new(Self(RwLock::new(service)))
    }

    pub fn replace(&self, service: Arc<dyn Service>) {
        *self.0.write().unwrap() = service;
    }
}

impl Service for Swappable {
    fn handle(&self, request: HttpRequest) -> HttpResponse {
        let current = Arc::clone(&self.0.read().unwrap());
        current.handle(request)
    }
}

/// Serves `service` until the listener fails. Handlers may block on outbound
/// calls, so each request runs on the blocking pool.
pub async fn serve(listener: TcpListener, service: Arc<dyn Service>) -> std::io::Result<()> {
    let app = axum::Router::new().fallback(dispatch).with_state(service);
    axum::serve(listener, app).await
}

async fn dispatch(State(service): State<Arc<dyn Service>>, request: Request) -> Response {
    let (parts, body) = request.into_parts();
    let bytes = match to_bytes(body, MAX_BODY_BYTES).await {
        Ok(b) => b.to_vec(),
        Err(_) => return StatusCode::PAYLOAD_TOO_LARGE.into_response(),
    };
    let request = http::Request::from_parts(parts, bytes);
    match tokio::task::spawn_blocking(move || service.handle(request)).await {
        Ok(response) => response.map(Body::from),
        Err(_) => StatusCode::INTERNAL_SERVER_ERROR.into_response(),
    }
}

/// Blocking HTTP client. Every status is returned as a response; only
/// connection-level failures are errors.
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(10))
    }
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent =
            ureq::Agent::config_builder().http_status_as_error(false).timeout_global(Some(timeout)).build().into();
        Self { agent }
    }
}

impl Transport for HttpTransport {
    fn send(&self, request: HttpRequest) -> Result<HttpResponse, TransportError> {
        let (parts, body) = request.into_parts();
        let result = if body.is_empty() {
            self.agent.run(http::Request::from_parts(parts, ()))
        } else {
            self.agent.run(http::Request::from_parts(parts, body))
        };
        let response = result.map_err(|e| match e {
            ureq::Error::Io(io) => TransportError::Unreachable(io.to_string()),
            ureq::Error::ConnectionFailed | ureq::Error::HostNotFound => TransportError::Unreachable(e.to_string()),
            ureq::Error::BadUri(_) => TransportError::InvalidRequest(e.to_string()),
            other => TransportError::Io(other.to_string()),
        })?;
        let (parts, mut body) = response.into_parts();
        let bytes = body.read_to_vec().map_err(|e| TransportError::Io(e.to_string()))?;
        Ok(http::Response::from_parts(parts, bytes))
    }
}
