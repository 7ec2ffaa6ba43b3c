use umax_core::{ClaimRequirement, ClaimToken};

/// Supplies claim tokens for the claims an authorization server still
/// requires. An empty answer means the requirements cannot be met.
///
/// Every round receives all outstanding requirements, not a delta, and the
/// answer must depend on them alone.
pub trait ClaimsProvider {
    fn provide(&self, required: &[ClaimRequirement]) -> Vec<ClaimToken>;
}

impl<F> ClaimsProvider for F
where
    F: Fn(&[ClaimRequirement]) -> Vec<ClaimToken>,
{
    fn provide(&self, required: &[ClaimRequirement]) -> Vec<ClaimToken> {
        self(required)
    }
}

/// Provider that never has anything to offer.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClaims;

impl ClaimsProvider for NoClaims {
    fn provide(&self, _: &[ClaimRequirement]) -> Vec<ClaimToken> {
        Vec::new()
    }
}

/// A fixed set of claim tokens, disclosed only when asked for: a token is
/// offered when some requirement accepts its format.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Wallet {
    tokens: Vec<ClaimToken>,
}

impl Wallet {
    pub fn new(tokens: Vec<ClaimToken>) -> Self {
        Self { tokens }
    }

    pub fn tokens(&self) -> &[ClaimToken] {
        &self.tokens
    }
}

impl ClaimsProvider for Wallet {
    fn provide(&self, required: &[ClaimRequirement]) -> Vec<ClaimToken> {
        self.tokens
            .iter()
            .filter(|t| required.iter().any(|r| r.accepted_formats.contains(&t.format)))
            .cloned()
            .collect()
    }
}
