//! Key material, signed compact tokens, published key sets and HTTP message
//! signatures. Ed25519 is the only algorithm.

pub mod httpsig;
pub mod jws;
pub mod keys;
pub mod token;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use ring::rand::{SecureRandom, SystemRandom};

pub use httpsig::{sign_http_message, verify_http_message, KeyAllowlist, SignatureError};
pub use keys::{KeyError, KeyRing, KeySetDocument, PublicJwk, SigningKeyPair};
pub use token::{mint_token, verify_token, AccessTokenClaims, TokenError};

/// URL-safe random identifier carrying `bytes * 8` bits of entropy.
pub fn random_id(bytes: usize) -> String {
    let mut buf = vec![0u8; bytes];
    SystemRandom::new().fill(&mut buf).expect("system randomness");
    URL_SAFE_NO_PAD.encode(buf)
}

pub(crate) fn b64(bytes: &[u8]) -> String {
    URL_SAFE_NO_PAD.encode(bytes)
}

pub(crate) fn unb64(text: &str) -> Option<Vec<u8>> {
    URL_SAFE_NO_PAD.decode(text).ok()
}
