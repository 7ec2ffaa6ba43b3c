//! Resource server whose every access decision comes from a UMA
//! authorization server.
//!
//! Each request maps to one scope (`GET`/`HEAD` read, `POST` append,
//! `PUT`/`PATCH` write, `DELETE` delete). Without a usable bearer token the
//! server asks the authorization server for a permission ticket: a `200`
//! answer means the resource is public and the request is served at once; a
//! ticket becomes a `401` UMA challenge. Bearer tokens are verified locally
//! against the authorization server's published keys.
//!
//! The server holds no policy of its own.

mod server;
mod store;

pub use server::{scope_for, KeySetService, RegistrationSummary, ResourceServer, RsSettings, StartupError};
pub use store::{normalize_path, parent_of, PathError, Store, StoredResource};
