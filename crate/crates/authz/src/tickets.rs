use std::collections::HashMap;

use chrono::{DateTime, Duration, Utc};
use umax_core::Scope;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestedPermission {
    pub registration_id: String,
    pub scopes: Vec<Scope>,
    pub purpose: Option<String>,
}

/// Negotiation state bound to an opaque, single-use value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermissionTicket {
    pub value: String,
    pub issued_at: DateTime<Utc>,
    pub ttl: Duration,
    pub requested: Vec<RequestedPermission>,
    /// Number of `need_info` responses that led to this ticket.
    pub round: u32,
}

impl PermissionTicket {
    pub fn expired_at(&self, now: DateTime<Utc>) -> bool {
        now >= self.issued_at + self.ttl
    }
}

#[derive(Debug, Default)]
pub(crate) struct TicketStore {
    live: HashMap<String, PermissionTicket>,
}

impl TicketStore {
    pub(crate) fn insert(&mut self, ticket: PermissionTicket) {
        self.live.insert(ticket.value.clone(), ticket);
    }

    /// Removes and returns the ticket; a second call with the same value
    /// returns `None`.
    pub(crate) fn consume(&mut self, value: &str) -> Option<PermissionTicket> {
        self.live.remove(value)
    }

    pub(crate) fn drop_registration(&mut self, registration_id: &str) {
        self.live.retain(|_, t| !t.requested.iter().any(|r| r.registration_id == registration_id));
    }

    pub(crate) fn len(&self) -> usize {
        self.live.len()
    }
}
