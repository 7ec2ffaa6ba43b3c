use std::fmt;

use chrono::{DateTime, Duration, Utc};
use ring::rand::{SecureRandom, SystemRandom};
use ring::signature::{self, Ed25519KeyPair, KeyPair, UnparsedPublicKey};
use serde::{Deserialize, Serialize};

use super::{b64, unb64};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KeyError {
    #[error("invalid key material: {0}")]
    Invalid(String),
    #[error("key set contains private key material")]
    PrivateMaterial,
}

/// An Ed25519 signing key identified by `kid`.
pub struct SigningKeyPair {
    kid: String,
    seed: [u8; 32],
    pair: Ed25519KeyPair,
}

impl SigningKeyPair {
    pub fn generate(kid: impl Into<String>) -> Self {
        let mut seed = [0u8; 32];
        SystemRandom::new().fill(&mut seed).expect("system randomness");
        Self::from_seed(kid, seed)
    }

    pub fn from_seed(kid: impl Into<String>, seed: [u8; 32]) -> Self {
        let pair = Ed25519KeyPair::from_seed_unchecked(&seed).expect("32-byte seed is always valid");
        Self { kid: kid.into(), seed, pair }
    }

    pub fn kid(&self) -> &str {
        &self.kid
    }

    pub fn public_key(&self) -> &[u8] {
        self.pair.public_key().as_ref()
    }

    pub fn sign(&self, message: &[u8]) -> Vec<u8> {
        self.pair.sign(message).as_ref().to_vec()
    }

    pub fn public_jwk(&self) -> PublicJwk {
        PublicJwk::ed25519(&self.kid, self.public_key())
    }

    pub fn key_set(&self) -> KeySetDocument {
        KeySetDocument { keys: vec![self.public_jwk()] }
    }

    pub fn to_private_jwk(&self) -> PrivateJwk {
        PrivateJwk { public: self.public_jwk(), d: b64(&self.seed) }
    }

    pub fn from_private_jwk(jwk: &PrivateJwk) -> Result<Self, KeyError> {
        jwk.public.check_profile()?;
        let seed: [u8; 32] = unb64(&jwk.d)
            .and_then(|bytes| bytes.try_into().ok())
            .ok_or_else(|| KeyError::Invalid("`d` must be a base64url 32-byte seed".into()))?;
        let key = Self::from_seed(jwk.public.kid.clone(), seed);
        if key.public_jwk().x != jwk.public.x {
            return Err(KeyError::Invalid("public key does not match seed".into()));
        }
        Ok(key)
    }
}

impl Clone for SigningKeyPair {
    fn clone(&self) -> Self {
        Self::from_seed(self.kid.clone(), self.seed)
    }
}

impl fmt::Debug for SigningKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SigningKeyPair").field("kid", &self.kid).field("seed", &"<redacted>").finish()
    }
}

/// JWK for an Ed25519 public key (RFC 8037).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicJwk {
    pub kty: String,
    pub crv: String,
    pub kid: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alg: Option<String>,
    #[serde(default, rename = "use", skip_serializing_if = "Option::is_none")]
    pub key_use: Option<String>,
    pub x: String,
}

impl PublicJwk {
    pub fn ed25519(kid: &str, public_key: &[u8]) -> Self {
        Self {
            kty: "OKP".into(),
            crv: "Ed25519".into(),
            kid: kid.into(),
            alg: Some("EdDSA".into()),
            key_use: Some("sig".into()),
            x: b64(public_key),
        }
    }

    fn check_profile(&self) -> Result<(), KeyError> {
        if self.kty != "OKP" || self.crv != "Ed25519" {
            return Err(KeyError::Invalid(format!("unsupported key type {}/{}", self.kty, self.crv)));
        }
        Ok(())
    }

    pub fn verify(&self, message: &[u8], sig: &[u8]) -> bool {
        if self.check_profile().is_err() {
            return false;
        }
        match unb64(&self.x) {
            Some(public) => UnparsedPublicKey::new(&signature::ED25519, public).verify(message, sig).is_ok(),
            None => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivateJwk {
    #[serde(flatten)]
    pub public: PublicJwk,
    pub d: String,
}

/// A JWKS document. Never carries private key material; parsing one that
/// does fails.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct KeySetDocument {
    pub keys: Vec<PublicJwk>,
}

#[derive(Deserialize)]
struct RawKeySet {
    keys: Vec<RawJwk>,
}

#[derive(Deserialize)]
struct RawJwk {
    #[serde(flatten)]
    public: PublicJwk,
    #[serde(default)]
    d: Option<serde_json::Value>,
}

impl<'de> Deserialize<'de> for KeySetDocument {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawKeySet::deserialize(deserializer)?;
        let mut keys = Vec::with_capacity(raw.keys.len());
        for k in raw.keys {
            if k.d.is_some() {
                return Err(serde::de::Error::custom(KeyError::PrivateMaterial));
            }
            keys.push(k.public);
        }
        Ok(Self { keys })
    }
}

impl KeySetDocument {
    pub fn find(&self, kid: &str) -> Option<&PublicJwk> {
        self.keys.iter().find(|k| k.kid == kid)
    }

    pub fn kids(&self) -> impl Iterator<Item = &str> {
        self.keys.iter().map(|k| k.kid.as_str())
    }
}

/// A party's signing keys over time: one current key, plus retired keys
/// that stay published until their overlap window ends.
#[derive(Debug, Clone)]
pub struct KeyRing {
    current: SigningKeyPair,
    retiring: Vec<(SigningKeyPair, DateTime<Utc>)>,
    overlap: Duration,
}

impl KeyRing {
    pub fn new(current: SigningKeyPair) -> Self {
        Self { current, retiring: Vec::new(), overlap: Duration::hours(1) }
    }

    pub fn with_overlap(mut self, overlap: Duration) -> Self {
        self.overlap = overlap;
        self
    }

    pub fn current(&self) -> &SigningKeyPair {
        &self.current
    }

    /// Makes `next` the signing key. The previous key stays in the published
    /// set until `now + overlap`.
    pub fn rotate(&mut self, next: SigningKeyPair, now: DateTime<Utc>) -> Result<(), KeyError> {
        if next.kid() == self.current.kid() || self.retiring.iter().any(|(k, _)| k.kid() == next.kid()) {
            return Err(KeyError::Invalid(format!("duplicate kid `{}`", next.kid())));
        }
        let previous = std::mem::replace(&mut self.current, next);
        self.retiring.push((previous, now + self.overlap));
        Ok(())
    }

    pub fn key_set(&self, now: DateTime<Utc>) -> KeySetDocument {
        let mut keys = vec![self.current.public_jwk()];
        keys.extend(self.retiring.iter().filter(|(_, until)| now < *until).map(|(k, _)| k.public_jwk()));
        KeySetDocument { keys }
    }
}
