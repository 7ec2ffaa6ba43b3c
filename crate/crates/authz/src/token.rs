use umax_core::uma::{PermissionDescriptor, UMA_TICKET_GRANT};
use umax_core::ClaimToken;

use crate::error::GrantError;

/// Parsed token endpoint form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenRequest {
    pub ticket: Option<String>,
    pub permissions: Option<Vec<PermissionDescriptor>>,
    pub claim_tokens: Vec<ClaimToken>,
}

impl TokenRequest {
    pub fn ticketed(ticket: impl Into<String>, claim_tokens: Vec<ClaimToken>) -> Self {
        Self { ticket: Some(ticket.into()), permissions: None, claim_tokens }
    }

    pub fn ticketless(permissions: Vec<PermissionDescriptor>, claim_tokens: Vec<ClaimToken>) -> Self {
        Self { ticket: None, permissions: Some(permissions), claim_tokens }
    }

    /// `claim_token` and `claim_token_format` fields pair up by position.
    pub fn from_form(pairs: &[(String, String)]) -> Result<Self, GrantError> {
        let mut grant_type = None;
        let mut ticket = None;
        let mut permissions = None;
        let mut raws = Vec::new();
        let mut formats = Vec::new();
        for (key, value) in pairs {
            match key.as_str() {
                "grant_type" => set_once(&mut grant_type, key, value)?,
                "ticket" => set_once(&mut ticket, key, value)?,
                "permissions" => set_once(&mut permissions, key, value)?,
                "claim_token" => raws.push(value.clone()),
                "claim_token_format" => formats.push(value.clone()),
                _ => {}
            }
        }
        match grant_type.as_deref() {
            None => return Err(GrantError::InvalidRequest("missing grant_type".into())),
            Some(UMA_TICKET_GRANT) => {}
            Some(other) => return Err(GrantError::UnsupportedGrantType(other.to_owned())),
        }
        if raws.len() != formats.len() {
            return Err(GrantError::InvalidRequest("every claim_token needs a claim_token_format".into()));
        }
        let permissions = permissions
            .map(|p| serde_json::from_str::<Vec<PermissionDescriptor>>(&p))
            .transpose()
            .map_err(|e| GrantError::InvalidRequest(format!("permissions: {e}")))?;
        match (&ticket, &permissions) {
            (None, None) => return Err(GrantError::InvalidRequest("either ticket or permissions is required".into())),
            (Some(_), Some(_)) => {
                return Err(GrantError::InvalidRequest("ticket and permissions are exclusive".into()))
            }
            _ => {}
        }
        let claim_tokens = raws.into_iter().zip(formats).map(|(raw, format)| ClaimToken::new(format, raw)).collect();
        Ok(Self { ticket, permissions, claim_tokens })
    }

    pub fn to_form(&self) -> Vec<(String, String)> {
        let mut form = vec![("grant_type".to_owned(), UMA_TICKET_GRANT.to_owned())];
        if let Some(t) = &self.ticket {
            form.push(("ticket".into(), t.clone()));
        }
        if let Some(p) = &self.permissions {
            form.push(("permissions".into(), serde_json::to_string(p).expect("descriptors serialize")));
        }
        for token in &self.claim_tokens {
            form.push(("claim_token".into(), token.raw.clone()));
            form.push(("claim_token_format".into(), token.format.clone()));
        }
        form
    }
}

fn set_once(slot: &mut Option<String>, key: &str, value: &str) -> Result<(), GrantError> {
    if slot.replace(value.to_owned()).is_some() {
        return Err(GrantError::InvalidRequest(format!("duplicate `{key}`")));
    }
    Ok(())
}
