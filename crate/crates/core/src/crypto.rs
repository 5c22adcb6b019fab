//! Keys, detached-signature envelopes, the interaction hash, and request
//! proof-of-possession.
//!
//! Every signature covers `SHA-256(payload) || context label`. The context
//! labels in [`context`] keep a signature made for one purpose from verifying
//! for another.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::canonical::canonical_bytes;
use crate::encoding::{b64, b64url, b64url_decode};
use crate::model::Timestamp;
use crate::random::RandomSource;

/// Envelope context labels.
pub mod context {
    pub const CLIENT_METADATA: &str = "client-metadata";
    pub const CREDENTIAL: &str = "credential";
    pub const VP_PROOF: &str = "vp-proof";
    pub const POP: &str = "pop";
}

/// Default tolerance between a possession proof's timestamp and the verifier clock.
pub const DEFAULT_POP_SKEW_SECS: i64 = 120;

/// Length of an unpadded base64url SHA-256 digest.
pub const HASH_B64_LEN: usize = 43;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("unsupported signature algorithm: {0}")]
    UnsupportedAlgorithm(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("malformed key material: {0}")]
    MalformedKey(String),
    #[error("key file: {0}")]
    KeyFile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    Ed25519,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Ed25519 => "Ed25519",
        }
    }
}

impl FromStr for Algorithm {
    type Err = CryptoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Ed25519" => Ok(Algorithm::Ed25519),
            other => Err(CryptoError::UnsupportedAlgorithm(other.to_string())),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A public verification key together with the reference that names it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PublicKey {
    pub key_id: String,
    pub algorithm: Algorithm,
    #[serde(with = "b64")]
    pub public: Vec<u8>,
}

impl PublicKey {
    fn verifying_key(&self) -> Option<VerifyingKey> {
        match self.algorithm {
            Algorithm::Ed25519 => {
                let raw: [u8; 32] = self.public.as_slice().try_into().ok()?;
                VerifyingKey::from_bytes(&raw).ok()
            }
        }
    }

    pub fn verify_raw(&self, message: &[u8], signature: &[u8]) -> bool {
        let Some(key) = self.verifying_key() else {
            return false;
        };
        let Ok(sig) = ed25519_dalek::Signature::from_slice(signature) else {
            return false;
        };
        key.verify(message, &sig).is_ok()
    }
}

/// Signing key pair. Deliberately not `Serialize`; the only way secret
/// material leaves the process is [`KeyPair::to_key_file`].
#[derive(Clone)]
pub struct KeyPair {
    key_id: String,
    algorithm: Algorithm,
    signing: SigningKey,
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("key_id", &self.key_id)
            .field("algorithm", &self.algorithm)
            .field("public", &b64url(self.signing.verifying_key().as_bytes()))
            .finish_non_exhaustive()
    }
}

impl KeyPair {
    pub fn generate(key_id: impl Into<String>, rng: &RandomSource) -> Self {
        let mut seed = [0u8; 32];
        rng.fill(&mut seed);
        Self::from_secret(key_id, Algorithm::Ed25519, &seed).expect("32-byte seed")
    }

    pub fn from_secret(key_id: impl Into<String>, algorithm: Algorithm, secret: &[u8]) -> Result<Self, CryptoError> {
        let raw: [u8; 32] = secret
            .try_into()
            .map_err(|_| CryptoError::MalformedKey(format!("expected 32 secret bytes, got {}", secret.len())))?;
        Ok(Self { key_id: key_id.into(), algorithm, signing: SigningKey::from_bytes(&raw) })
    }

    pub fn key_id(&self) -> &str {
        &self.key_id
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey {
            key_id: self.key_id.clone(),
            algorithm: self.algorithm,
            public: self.signing.verifying_key().to_bytes().to_vec(),
        }
    }

    pub fn with_key_id(mut self, key_id: impl Into<String>) -> Self {
        self.key_id = key_id.into();
        self
    }

    fn sign_raw(&self, message: &[u8]) -> Vec<u8> {
        self.signing.sign(message).to_bytes().to_vec()
    }

    /// Text key file: one `name: value` line each for key_id, algorithm,
    /// public and secret (both base64url).
    pub fn to_key_file(&self) -> String {
        format!(
            "key_id: {}\nalgorithm: {}\npublic: {}\nsecret: {}\n",
            self.key_id,
            self.algorithm,
            b64url(self.signing.verifying_key().as_bytes()),
            b64url(self.signing.as_bytes()),
        )
    }

    pub fn from_key_file(text: &str) -> Result<Self, CryptoError> {
        let mut key_id = None;
        let mut algorithm = None;
        let mut public = None;
        let mut secret = None;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (name, value) = line
                .split_once(':')
                .ok_or_else(|| CryptoError::KeyFile(format!("expected `name: value`, got {line:?}")))?;
            let value = value.trim().to_string();
            match name.trim() {
                "key_id" => key_id = Some(value),
                "algorithm" => algorithm = Some(value.parse::<Algorithm>()?),
                "public" => public = Some(value),
                "secret" => secret = Some(value),
                other => return Err(CryptoError::KeyFile(format!("unknown field {other:?}"))),
            }
        }
        let missing = |f: &str| CryptoError::KeyFile(format!("missing {f}"));
        let secret = secret.ok_or_else(|| missing("secret"))?;
        let secret = b64url_decode(&secret).map_err(|e| CryptoError::MalformedKey(e.to_string()))?;
        let pair = Self::from_secret(
            key_id.ok_or_else(|| missing("key_id"))?,
            algorithm.ok_or_else(|| missing("algorithm"))?,
            &secret,
        )?;
        if let Some(public) = public {
            if public != b64url(&pair.public_key().public) {
                return Err(CryptoError::MalformedKey("public key does not match secret".into()));
            }
        }
        Ok(pair)
    }

    pub fn load(path: &Path) -> Result<Self, CryptoError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CryptoError::KeyFile(format!("{}: {e}", path.display())))?;
        Self::from_key_file(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), CryptoError> {
        std::fs::write(path, self.to_key_file()).map_err(|e| CryptoError::KeyFile(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignedEnvelope {
    pub algorithm: Algorithm,
    pub key_id: String,
    #[serde(with = "b64")]
    pub payload_digest: Vec<u8>,
    #[serde(with = "b64")]
    pub signature: Vec<u8>,
}

fn signing_input(digest: &[u8], context: &str) -> Vec<u8> {
    let mut input = Vec::with_capacity(digest.len() + context.len());
    input.extend_from_slice(digest);
    input.extend_from_slice(context.as_bytes());
    input
}

pub fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

pub fn sign(payload: &[u8], context: &str, key: &KeyPair) -> Result<SignedEnvelope, CryptoError> {
    match key.algorithm {
        Algorithm::Ed25519 => {}
    }
    let digest = sha256(payload);
    Ok(SignedEnvelope {
        algorithm: key.algorithm,
        key_id: key.key_id.clone(),
        payload_digest: digest.to_vec(),
        signature: key.sign_raw(&signing_input(&digest, context)),
    })
}

pub fn verify(envelope: &SignedEnvelope, payload: &[u8], context: &str, key: &PublicKey) -> bool {
    if envelope.algorithm != key.algorithm {
        return false;
    }
    let digest = sha256(payload);
    if envelope.payload_digest != digest {
        return false;
    }
    key.verify_raw(&signing_input(&digest, context), &envelope.signature)
}

/// Digest binding the callback to the session that started it:
/// `base64url(SHA-256(client_nonce "\n" server_nonce "\n" interaction_ref "\n" grant_endpoint))`.
pub fn interaction_hash(
    client_nonce: &str,
    server_nonce: &str,
    interaction_ref: &str,
    grant_endpoint_uri: &str,
) -> Result<String, CryptoError> {
    for (name, value) in [
        ("client_nonce", client_nonce),
        ("server_nonce", server_nonce),
        ("interaction_ref", interaction_ref),
        ("grant_endpoint_uri", grant_endpoint_uri),
    ] {
        if value.is_empty() {
            return Err(CryptoError::EmptyInput(name));
        }
    }
    let joined = [client_nonce, server_nonce, interaction_ref, grant_endpoint_uri].join("\n");
    Ok(b64url(&sha256(joined.as_bytes())))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PossessionProof {
    pub key_id: String,
    pub timestamp: Timestamp,
    #[serde(with = "b64")]
    pub request_digest: Vec<u8>,
    #[serde(with = "b64")]
    pub signature: Vec<u8>,
}

#[derive(Serialize)]
struct ProofFields<'a> {
    key_id: &'a str,
    timestamp: Timestamp,
    #[serde(with = "b64")]
    request_digest: &'a [u8],
}

/// `SHA-256(method "\n" uri "\n" SHA-256(body))`.
pub fn request_digest(method: &str, uri: &str, body: &[u8]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(method.as_bytes());
    hasher.update(b"\n");
    hasher.update(uri.as_bytes());
    hasher.update(b"\n");
    hasher.update(sha256(body));
    hasher.finalize().into()
}

impl PossessionProof {
    fn signed_fields(&self) -> Vec<u8> {
        canonical_bytes(&ProofFields {
            key_id: &self.key_id,
            timestamp: self.timestamp,
            request_digest: &self.request_digest,
        })
    }

    /// Header form: base64url of the canonical JSON.
    pub fn to_header(&self) -> String {
        b64url(&canonical_bytes(self))
    }

    pub fn from_header(value: &str) -> Option<Self> {
        let raw = b64url_decode(value.trim()).ok()?;
        serde_json::from_slice(&raw).ok()
    }
}

pub fn make_possession_proof(
    method: &str,
    uri: &str,
    body: &[u8],
    key: &KeyPair,
    now: Timestamp,
) -> Result<PossessionProof, CryptoError> {
    let mut proof = PossessionProof {
        key_id: key.key_id.clone(),
        timestamp: now,
        request_digest: request_digest(method, uri, body).to_vec(),
        signature: Vec::new(),
    };
    proof.signature = sign(&proof.signed_fields(), context::POP, key)?.signature;
    Ok(proof)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Error)]
pub enum ProofRejection {
    #[error("possession proof signature does not verify under the bound key")]
    BadSignature,
    #[error("possession proof covers a different request")]
    DigestMismatch,
    #[error("possession proof timestamp outside the allowed skew")]
    StaleProof,
}

pub fn verify_possession_proof(
    proof: &PossessionProof,
    method: &str,
    uri: &str,
    body: &[u8],
    expected_key: &PublicKey,
    now: Timestamp,
    skew_secs: i64,
) -> Result<(), ProofRejection> {
    let fields = proof.signed_fields();
    let envelope = SignedEnvelope {
        algorithm: expected_key.algorithm,
        key_id: proof.key_id.clone(),
        payload_digest: sha256(&fields).to_vec(),
        signature: proof.signature.clone(),
    };
    if !verify(&envelope, &fields, context::POP, expected_key) {
        return Err(ProofRejection::BadSignature);
    }
    if proof.request_digest != request_digest(method, uri, body) {
        return Err(ProofRejection::DigestMismatch);
    }
    if (now - proof.timestamp).abs() > skew_secs {
        return Err(ProofRejection::StaleProof);
    }
    Ok(())
}
