//! UMA requesting party client, the in-process scenario harness and the
//! HTTP adapters behind the `umax` binary.
//!
//! [`session::UmaClient`] turns a resource server challenge into a token by
//! redeeming the ticket, answering `need_info` from a
//! [`provider::ClaimsProvider`] for at most a bounded number of rounds, then
//! retries with the bearer token. Every grant can be retained in an
//! [`audit::AuditLog`] and re-verified later against the issuer keys.

pub mod audit;
pub mod harness;
pub mod http;
pub mod provider;
pub mod session;
