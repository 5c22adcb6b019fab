//! Protocol messages and records exchanged between Consumer, Provider and Wallet.

use std::collections::BTreeSet;
use std::fmt;
use std::net::IpAddr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::canonical_bytes;
use crate::crypto::{self, CryptoError, KeyPair, PublicKey, SignedEnvelope};
use crate::vc::{PresentationDefinition, SubjectClaims};

/// Integer UTC seconds.
pub type Timestamp = i64;

/// Upper bound on `valid_until - valid_from` of signed client metadata.
pub const DEFAULT_MAX_METADATA_WINDOW_SECS: i64 = 300;

const MIN_NONCE_CHARS: usize = 22;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("invariant violation: {}", display_violations(.0))]
    InvariantViolation(Vec<Violation>),
    #[error("decode failed: {0}")]
    Decode(String),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

fn display_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.0.as_str()).collect::<Vec<_>>().join("; ")
}

/// One broken invariant, described in words.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Violation(pub String);

impl Violation {
    fn new(text: impl Into<String>) -> Self {
        Self(text.into())
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Type-level invariants, reported as data.
pub trait Invariants {
    fn violations(&self) -> Vec<Violation>;
}

pub mod violation {
    pub const FLOWS_EMPTY: &str = "flow_preferences non-empty";
    pub const FLOWS_DUPLICATE: &str = "flow_preferences contains duplicates";
    pub const INTERACT_FORBIDDEN: &str = "interact must be absent for lvp-only";
    pub const INTERACT_REQUIRED: &str = "interact required for wallet_interaction";
    pub const CLIENT_KEY_REQUIRED: &str = "client.key required for wallet_interaction";
    pub const METADATA_REQUIRED: &str = "client.metadata required for lvp-only";
    pub const DID_PREFIX: &str = "did must begin with did:web:";
    pub const CALLBACK_SCHEME: &str = "callback_uri must be https (http only on loopback)";
    pub const CLIENT_NONCE: &str = "client_nonce must be base64url with at least 128 bits";
    pub const METADATA_ORDER: &str = "metadata valid_from < valid_until";
    pub const METADATA_WINDOW: &str = "metadata validity window exceeds maximum";
    pub const METADATA_DID: &str = "metadata did must equal client did";
    pub const ACCESS_EMPTY: &str = "access must list at least one right";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowId {
    WalletInteraction,
    LvpAuthorization,
}

impl FlowId {
    pub const ALL: [FlowId; 2] = [FlowId::WalletInteraction, FlowId::LvpAuthorization];

    pub fn as_str(self) -> &'static str {
        match self {
            FlowId::WalletInteraction => "wallet_interaction",
            FlowId::LvpAuthorization => "lvp_authorization",
        }
    }
}

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown flow identifier {0:?}")]
pub struct UnknownFlow(pub String);

impl FromStr for FlowId {
    type Err = UnknownFlow;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wallet_interaction" => Ok(FlowId::WalletInteraction),
            "lvp_authorization" => Ok(FlowId::LvpAuthorization),
            other => Err(UnknownFlow(other.to_string())),
        }
    }
}

/// A resource right: label plus the actions requested under it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AccessRight {
    pub label: String,
    #[serde(default)]
    pub actions: Vec<String>,
}

impl AccessRight {
    pub fn new(label: impl Into<String>, actions: &[&str]) -> Self {
        Self { label: label.into(), actions: actions.iter().map(|a| a.to_string()).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallbackMode {
    Redirect,
    Push,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionSpec {
    pub callback_uri: String,
    pub callback_mode: CallbackMode,
    pub client_nonce: String,
}

impl Invariants for InteractionSpec {
    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !callback_uri_allowed(&self.callback_uri) {
            out.push(Violation::new(violation::CALLBACK_SCHEME));
        }
        if !is_b64url(&self.client_nonce) || self.client_nonce.len() < MIN_NONCE_CHARS {
            out.push(Violation::new(violation::CLIENT_NONCE));
        }
        out
    }
}

fn is_b64url(s: &str) -> bool {
    s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

/// https anywhere; http only when the host is a loopback address.
pub fn callback_uri_allowed(uri: &str) -> bool {
    let Ok(parsed) = url::Url::parse(uri) else {
        return false;
    };
    match parsed.scheme() {
        "https" => parsed.host_str().is_some(),
        "http" => match parsed.host() {
            Some(url::Host::Domain(d)) => d.eq_ignore_ascii_case("localhost"),
            Some(url::Host::Ipv4(ip)) => IpAddr::V4(ip).is_loopback(),
            Some(url::Host::Ipv6(ip)) => IpAddr::V6(ip).is_loopback(),
            None => false,
        },
        _ => false,
    }
}

pub fn is_did_web(did: &str) -> bool {
    did.starts_with("did:web:")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientIdentity {
    pub did: String,
    /// Key the client proves possession of when continuing a grant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<PublicKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<SignedClientMetadata>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display_name: Option<String>,
}

impl Invariants for ClientIdentity {
    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !is_did_web(&self.did) {
            out.push(Violation::new(format!("client {}", violation::DID_PREFIX)));
        }
        if let Some(meta) = &self.metadata {
            out.extend(meta.violations());
            if meta.metadata.did != self.did {
                out.push(Violation::new(violation::METADATA_DID));
            }
        }
        out
    }
}

/// The signed part of the client metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientMetadata {
    pub valid_from: Timestamp,
    pub valid_until: Timestamp,
    pub audience: String,
    pub did: String,
    pub key_id: String,
}

impl ClientMetadata {
    pub fn sign(self, key: &KeyPair) -> Result<SignedClientMetadata, CryptoError> {
        let envelope = crypto::sign(&canonical_bytes(&self), crypto::context::CLIENT_METADATA, key)?;
        Ok(SignedClientMetadata { metadata: self, envelope })
    }

    pub fn window_violations(&self, max_window: i64) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.valid_from >= self.valid_until {
            out.push(Violation::new(violation::METADATA_ORDER));
        } else if self.valid_until - self.valid_from > max_window {
            out.push(Violation::new(violation::METADATA_WINDOW));
        }
        if !is_did_web(&self.did) {
            out.push(Violation::new(format!("metadata {}", violation::DID_PREFIX)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedClientMetadata {
    #[serde(flatten)]
    pub metadata: ClientMetadata,
    pub envelope: SignedEnvelope,
}

impl SignedClientMetadata {
    /// Bytes the envelope signs.
    pub fn signed_bytes(&self) -> Vec<u8> {
        canonical_bytes(&self.metadata)
    }

    pub fn verify(&self, key: &PublicKey) -> bool {
        crypto::verify(&self.envelope, &self.signed_bytes(), crypto::context::CLIENT_METADATA, key)
    }

    /// SHA-256 of the canonical form of the whole signed record.
    pub fn digest(&self) -> [u8; 32] {
        crypto::sha256(&canonical_bytes(self))
    }
}

impl Invariants for SignedClientMetadata {
    fn violations(&self) -> Vec<Violation> {
        self.metadata.window_violations(DEFAULT_MAX_METADATA_WINDOW_SECS)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrantRequest {
    pub access: Vec<AccessRight>,
    pub client: ClientIdentity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interact: Option<InteractionSpec>,
    pub flow_preferences: Vec<FlowId>,
}

impl Invariants for GrantRequest {
    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.flow_preferences.is_empty() {
            out.push(Violation::new(violation::FLOWS_EMPTY));
        }
        let unique: BTreeSet<_> = self.flow_preferences.iter().collect();
        if unique.len() != self.flow_preferences.len() {
            out.push(Violation::new(violation::FLOWS_DUPLICATE));
        }
        let wants_wallet = self.flow_preferences.contains(&FlowId::WalletInteraction);
        let lvp_only =
            !self.flow_preferences.is_empty() && self.flow_preferences.iter().all(|f| *f == FlowId::LvpAuthorization);
        if lvp_only && self.interact.is_some() {
            out.push(Violation::new(violation::INTERACT_FORBIDDEN));
        }
        if wants_wallet && self.interact.is_none() {
            out.push(Violation::new(violation::INTERACT_REQUIRED));
        }
        if wants_wallet && self.client.key.is_none() {
            out.push(Violation::new(violation::CLIENT_KEY_REQUIRED));
        }
        if lvp_only && self.client.metadata.is_none() {
            out.push(Violation::new(violation::METADATA_REQUIRED));
        }
        if self.access.is_empty() {
            out.push(Violation::new(violation::ACCESS_EMPTY));
        }
        if let Some(interact) = &self.interact {
            out.extend(interact.violations());
        }
        out.extend(self.client.violations());
        out
    }
}

/// Outcome of [`validate_grant_request`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn mentions(&self, text: &str) -> bool {
        self.violations.iter().any(|v| v.0.contains(text))
    }
}

pub fn validate_grant_request(req: &GrantRequest) -> ValidationReport {
    ValidationReport { violations: req.violations() }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContinueInfo {
    pub uri: String,
    pub continuation_token: String,
    pub wait_seconds: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractInfo {
    pub vp_exchange_uri: String,
    pub server_nonce: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessToken {
    pub value: String,
    pub bound_key: PublicKey,
    pub rights: Vec<AccessRight>,
    pub expires_at: Timestamp,
}

impl Invariants for AccessToken {
    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.value.len() < MIN_NONCE_CHARS || !is_b64url(&self.value) {
            out.push(Violation::new("access token value must be opaque base64url with at least 128 bits"));
        }
        if self.bound_key.public.is_empty() {
            out.push(Violation::new("access token must be bound to a key"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrantResponse {
    pub selected_flow: FlowId,
    #[serde(default, rename = "continue", skip_serializing_if = "Option::is_none")]
    pub continue_info: Option<ContinueInfo>,
    #[serde(default, rename = "interact", skip_serializing_if = "Option::is_none")]
    pub interact_info: Option<InteractInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub access_token: Option<AccessToken>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_info: Option<SubjectClaims>,
}

impl Invariants for GrantResponse {
    fn violations(&self) -> Vec<Violation> {
        let interaction = self.interact_info.is_some() && self.continue_info.is_some();
        let partial = self.interact_info.is_some() != self.continue_info.is_some();
        let token = self.access_token.is_some();
        let mut out = Vec::new();
        if partial || interaction == token {
            out.push(Violation::new("grant response carries exactly one of interact+continue or access_token"));
        }
        if let Some(t) = &self.access_token {
            out.extend(t.violations());
        }
        out
    }
}

/// Body of the Continue Request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContinueRequest {
    pub interact_ref: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExchangeStatus {
    Pending,
    Presented,
    Authorized,
    Denied,
    Expired,
}

impl ExchangeStatus {
    pub const ALL: [ExchangeStatus; 5] = [
        ExchangeStatus::Pending,
        ExchangeStatus::Presented,
        ExchangeStatus::Authorized,
        ExchangeStatus::Denied,
        ExchangeStatus::Expired,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(self, ExchangeStatus::Authorized | ExchangeStatus::Denied | ExchangeStatus::Expired)
    }

    /// pending -> presented -> {authorized, denied}; any non-terminal -> expired.
    pub fn can_become(self, next: ExchangeStatus) -> bool {
        use ExchangeStatus::*;
        match (self, next) {
            (s, _) if s.is_terminal() => false,
            (_, Expired) => true,
            (Pending, Presented) => true,
            (Presented, Authorized | Denied) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeRecord {
    pub exchange_id: String,
    pub grant_id: String,
    pub definition: PresentationDefinition,
    pub server_nonce: String,
    pub status: ExchangeStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction_ref: Option<String>,
    pub created_at: Timestamp,
}

impl ExchangeRecord {
    /// Moves to `next` if the transition is allowed.
    pub fn transition(&mut self, next: ExchangeStatus) -> Result<(), ExchangeStatus> {
        if !self.status.can_become(next) {
            return Err(self.status);
        }
        self.status = next;
        Ok(())
    }
}

impl Invariants for ExchangeRecord {
    fn violations(&self) -> Vec<Violation> {
        let authorized = self.status == ExchangeStatus::Authorized;
        if authorized != self.interaction_ref.is_some() {
            vec![Violation::new("interaction_ref is set exactly when the exchange is authorized")]
        } else {
            Vec::new()
        }
    }
}

/// Parameters relayed to the consumer callback after a successful interaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallbackParams {
    pub interaction_ref: String,
    #[serde(rename = "hash")]
    pub interaction_hash: String,
}

impl Invariants for CallbackParams {
    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.interaction_ref.is_empty() {
            out.push(Violation::new("interaction_ref non-empty"));
        }
        if self.interaction_hash.is_empty() {
            out.push(Violation::new("hash non-empty"));
        }
        out
    }
}

/// What the wallet relays to the consumer callback: either the interaction
/// parameters or the failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CallbackMessage {
    Authorized(CallbackParams),
    Denied { result: InteractionResult },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionResult {
    Authorized,
    Denied,
}

/// Wallet HTTP body posted to the VP exchange endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VpSubmission {
    Presentation { vp_token: crate::vc::Presentation },
    Refusal { error: String },
}

/// The provider's answer to a VP submission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VpSubmissionResult {
    pub result: InteractionResult,
    pub callback_uri: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// What `GET /vp/exchange/{id}` returns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeRequestObject {
    pub definition: PresentationDefinition,
    pub server_nonce: String,
    pub audience: String,
}

/// GNAP-style error body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl ErrorBody {
    pub fn new(error: impl Into<String>) -> Self {
        Self { error: error.into(), reason: None, description: None }
    }

    pub fn with_reason(mut self, reason: impl Into<String>) -> Self {
        self.reason = Some(reason.into());
        self
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = Some(description.into());
        self
    }

    /// The most specific label: `reason` when present, else `error`.
    pub fn label(&self) -> &str {
        self.reason.as_deref().unwrap_or(&self.error)
    }
}
