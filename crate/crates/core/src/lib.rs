//! Building blocks shared by every party of the umax suite.
//!
//! The crate holds the vocabulary that crosses party boundaries (scopes,
//! constraints, usage requirements, claim descriptors), a small synchronous
//! HTTP abstraction used both for in-process wiring and real sockets, a clock
//! abstraction, the UMA wire documents, and the message-security primitives
//! (Ed25519 keys, key sets, signed tokens and HTTP message signatures).

pub mod clock;
pub mod net;
pub mod security;
pub mod uma;
pub mod vocab;

pub use clock::{Clock, ManualClock, SystemClock};
pub use net::{HttpRequest, HttpResponse, Service, Transport, TransportError};
pub use vocab::{
    ClaimRequirement, ClaimToken, Constraint, Scope, TemporalWindow, UsageKind, UsageRequirement, VerifiedClaim,
};
