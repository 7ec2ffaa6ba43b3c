//! Retained grants and their offline verification.
//!
//! Records are appended to one JSON-lines file per client identity and never
//! rewritten. Verification checks the token signature only: an expired token
//! remains valid evidence that access was granted.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use umax_core::security::token::verify_token_signature;
use umax_core::security::{KeySetDocument, TokenError};
use umax_core::uma::ResourcePermission;
use umax_core::UsageRequirement;

/// Evidence of one grant as the client received it. The access token is
/// kept opaque; permissions and usage requirements come from the grant body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AuditRecord {
    pub obtained_at: DateTime<Utc>,
    pub as_issuer: String,
    pub rs_origin: String,
    pub access_token: String,
    pub permissions: Vec<ResourcePermission>,
    pub usage_requirements: Vec<UsageRequirement>,
    /// Tickets presented at the token endpoint, in order.
    pub ticket_trail: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error("malformed audit record: {0}")]
    Malformed(String),
    #[error("invalid client identity `{0}`")]
    InvalidIdentity(String),
    #[error("audit store: {0}")]
    Io(#[from] io::Error),
}

/// A field where the record disagrees with the copy embedded in the token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Mismatch {
    AsIssuer,
    RsOrigin,
    Permissions,
    UsageRequirements,
    /// `obtainedAt` lies outside the token's validity window.
    ObtainedAt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditReport {
    pub signature_valid: bool,
    /// `[iat, exp)` of the token; absent when the signature does not verify.
    pub window: Option<(DateTime<Utc>, DateTime<Utc>)>,
    pub permissions: Vec<ResourcePermission>,
    pub usage_requirements: Vec<UsageRequirement>,
    pub mismatches: Vec<Mismatch>,
}

impl AuditReport {
    /// Signature verified and every restated field agrees with the token.
    pub fn is_sound(&self) -> bool {
        self.signature_valid && self.mismatches.is_empty()
    }
}

/// Checks `record` against the authorization server's key set as of
/// `obtainedAt`, without any current-validity check.
pub fn verify_audit(record: &AuditRecord, as_keys: &KeySetDocument) -> Result<AuditReport, AuditError> {
    let claims = match verify_token_signature(&record.access_token, as_keys) {
        Ok(claims) => claims,
        Err(TokenError::BadSignature) => {
            return Ok(AuditReport {
                signature_valid: false,
                window: None,
                permissions: Vec::new(),
                usage_requirements: Vec::new(),
                mismatches: Vec::new(),
            })
        }
        Err(e) => return Err(AuditError::Malformed(e.to_string())),
    };
    let instant = |secs: i64| {
        DateTime::<Utc>::from_timestamp(secs, 0).ok_or_else(|| AuditError::Malformed(format!("timestamp {secs}")))
    };
    let window = (instant(claims.iat)?, instant(claims.exp)?);
    let mut mismatches = Vec::new();
    if claims.iss != record.as_issuer {
        mismatches.push(Mismatch::AsIssuer);
    }
    if claims.aud != record.rs_origin {
        mismatches.push(Mismatch::RsOrigin);
    }
    if sorted(&claims.permissions) != sorted(&record.permissions) {
        mismatches.push(Mismatch::Permissions);
    }
    if sorted(&claims.usage) != sorted(&record.usage_requirements) {
        mismatches.push(Mismatch::UsageRequirements);
    }
    if record.obtained_at < window.0 || record.obtained_at >= window.1 {
        mismatches.push(Mismatch::ObtainedAt);
    }
    Ok(AuditReport {
        signature_valid: true,
        window: Some(window),
        permissions: claims.permissions,
        usage_requirements: claims.usage,
        mismatches,
    })
}

fn sorted<T: Ord + Clone>(items: &[T]) -> Vec<T> {
    let mut v = items.to_vec();
    v.sort();
    v
}

/// Append-only store holding one `<identity>.jsonl` file per client
/// identity.
#[derive(Debug)]
pub struct AuditLog {
    path: PathBuf,
    append: Mutex<()>,
}

impl AuditLog {
    /// Identities are restricted to `[A-Za-z0-9._-]` and may not start with
    /// a dot, so the file always lands directly inside `dir`.
    pub fn open(dir: &Path, identity: &str) -> Result<Self, AuditError> {
        let valid = !identity.is_empty()
            && !identity.starts_with('.')
            && identity.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
        if !valid {
            return Err(AuditError::InvalidIdentity(identity.to_owned()));
        }
        fs::create_dir_all(dir)?;
        Ok(Self { path: dir.join(format!("{identity}.jsonl")), append: Mutex::new(()) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// One `write` call per record on an append-mode file, so concurrent
    /// writers never interleave within a line.
    pub fn append(&self, record: &AuditRecord) -> Result<(), AuditError> {
        let mut line = serde_json::to_vec(record).map_err(|e| AuditError::Malformed(e.to_string()))?;
        line.push(b'\n');
        let _guard = self.append.lock().unwrap();
        let mut file = OpenOptions::new().create(true).append(true).open(&self.path)?;
        file.write_all(&line)?;
        file.sync_data()?;
        Ok(())
    }

    pub fn records(&self) -> Result<Vec<AuditRecord>, AuditError> {
        if !self.path.exists() {
            return Ok(Vec::new());
        }
        read_records(&self.path)
    }
}

/// Parses a JSON-lines record file, skipping blank lines.
pub fn read_records(path: &Path) -> Result<Vec<AuditRecord>, AuditError> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| AuditError::Malformed(format!("line {}: {e}", n + 1)))?;
        records.push(record);
    }
    Ok(records)
}
