//! UMA 2.0 authorization server.
//!
//! Resource servers authenticate every protection call (registration,
//! permission, introspection) with an HTTP message signature from a key
//! listed for their origin. Clients redeem permission tickets, or describe
//! the wanted permissions directly, at the token endpoint, pushing claim
//! tokens as they go.
//!
//! Tickets are single use: each presentation removes the ticket, and a
//! `need_info` answer carries a fresh one with the round counter
//! incremented. A grant requires every requested (resource, scope) pair to
//! be granted by the policy engine at one decision instant, which is also
//! the token's `iat`.
//!
//! [`AuthorizationServer`] implements [`umax_core::Service`], so it can be
//! mounted on any transport.

mod config;
mod error;
mod registry;
mod server;
mod service;
mod tickets;
mod token;

pub use config::{AsSettings, RsAllowlist, RsKeySource};
pub use error::{GrantError, ProtectionError};
pub use registry::ResourceRegistration;
pub use server::{AuthorizationServer, GrantRecord, PermissionOutcome, TokenOutcome};
pub use tickets::{PermissionTicket, RequestedPermission};
pub use token::TokenRequest;
