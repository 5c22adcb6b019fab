//! Credentials, presentations, presentation definitions and the trusted
//! issuer registry.
//!
//! Proofs are detached envelopes over the canonical form of the record with
//! its `proof` field removed.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::canonical::canonical_bytes;
use crate::crypto::{self, context, CryptoError, KeyPair, SignedEnvelope};
use crate::did::ResolveDid;
use crate::model::Timestamp;

pub const BASE_CREDENTIAL_TYPE: &str = "VerifiableCredential";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VcError {
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error("validity window must satisfy valid_from < valid_until")]
    InvalidValidity,
    #[error("credential {credential_id} names subject {subject}, not holder {holder}")]
    SubjectMismatch { credential_id: String, subject: String, holder: String },
    #[error("registry: {0}")]
    Registry(String),
    #[error("credential store: {0}")]
    Store(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credential {
    pub credential_id: String,
    pub types: Vec<String>,
    pub issuer_did: String,
    pub subject_did: String,
    pub claims: BTreeMap<String, Value>,
    pub valid_from: Timestamp,
    pub valid_until: Timestamp,
    pub proof: SignedEnvelope,
}

#[derive(Serialize)]
struct UnsignedCredential<'a> {
    credential_id: &'a str,
    types: &'a [String],
    issuer_did: &'a str,
    subject_did: &'a str,
    claims: &'a BTreeMap<String, Value>,
    valid_from: Timestamp,
    valid_until: Timestamp,
}

impl Credential {
    pub fn signed_bytes(&self) -> Vec<u8> {
        canonical_bytes(&UnsignedCredential {
            credential_id: &self.credential_id,
            types: &self.types,
            issuer_did: &self.issuer_did,
            subject_did: &self.subject_did,
            claims: &self.claims,
            valid_from: self.valid_from,
            valid_until: self.valid_until,
        })
    }

    pub fn has_type(&self, t: &str) -> bool {
        self.types.iter().any(|x| x == t)
    }

    pub fn is_valid_at(&self, now: Timestamp) -> bool {
        self.valid_from <= now && now <= self.valid_until
    }
}

/// Everything a credential carries except its id (optional) and proof.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CredentialDraft {
    pub credential_id: Option<String>,
    pub types: Vec<String>,
    pub issuer_did: String,
    pub subject_did: String,
    pub claims: BTreeMap<String, Value>,
    pub valid_from: Timestamp,
    pub valid_until: Timestamp,
}

/// Test issuer: signs a credential with `issuer_key`.
///
/// `VerifiableCredential` is prepended to the types when missing. Without an
/// explicit id, the id is derived from the digest of the unsigned content.
pub fn issue_credential(issuer_key: &KeyPair, draft: CredentialDraft) -> Result<Credential, VcError> {
    if draft.valid_from >= draft.valid_until {
        return Err(VcError::InvalidValidity);
    }
    let mut types = draft.types;
    if !types.iter().any(|t| t == BASE_CREDENTIAL_TYPE) {
        types.insert(0, BASE_CREDENTIAL_TYPE.to_string());
    }
    let mut credential = Credential {
        credential_id: draft.credential_id.unwrap_or_default(),
        types,
        issuer_did: draft.issuer_did,
        subject_did: draft.subject_did,
        claims: draft.claims,
        valid_from: draft.valid_from,
        valid_until: draft.valid_until,
        proof: SignedEnvelope {
            algorithm: issuer_key.algorithm(),
            key_id: String::new(),
            payload_digest: Vec::new(),
            signature: Vec::new(),
        },
    };
    if credential.credential_id.is_empty() {
        let digest = crypto::sha256(&credential.signed_bytes());
        credential.credential_id = format!("urn:vc:{}", crate::encoding::b64url(&digest[..12]));
    }
    credential.proof = crypto::sign(&credential.signed_bytes(), context::CREDENTIAL, issuer_key)?;
    Ok(credential)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presentation {
    pub holder_did: String,
    pub credentials: Vec<Credential>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audience: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonce: Option<String>,
    pub proof: SignedEnvelope,
}

#[derive(Serialize)]
struct UnsignedPresentation<'a> {
    holder_did: &'a str,
    credentials: &'a [Credential],
    #[serde(skip_serializing_if = "Option::is_none")]
    audience: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nonce: Option<&'a str>,
}

impl Presentation {
    pub fn signed_bytes(&self) -> Vec<u8> {
        canonical_bytes(&UnsignedPresentation {
            holder_did: &self.holder_did,
            credentials: &self.credentials,
            audience: self.audience.as_deref(),
            nonce: self.nonce.as_deref(),
        })
    }
}

pub fn build_presentation(
    holder_key: &KeyPair,
    holder_did: &str,
    credentials: &[Credential],
    audience: Option<&str>,
    nonce: Option<&str>,
) -> Result<Presentation, VcError> {
    if let Some(c) = credentials.iter().find(|c| c.subject_did != holder_did) {
        return Err(VcError::SubjectMismatch {
            credential_id: c.credential_id.clone(),
            subject: c.subject_did.clone(),
            holder: holder_did.to_string(),
        });
    }
    let mut p = Presentation {
        holder_did: holder_did.to_string(),
        credentials: credentials.to_vec(),
        audience: audience.map(str::to_string),
        nonce: nonce.map(str::to_string),
        proof: SignedEnvelope {
            algorithm: holder_key.algorithm(),
            key_id: String::new(),
            payload_digest: Vec::new(),
            signature: Vec::new(),
        },
    };
    p.proof = crypto::sign(&p.signed_bytes(), context::VP_PROOF, holder_key)?;
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InputDescriptor {
    pub descriptor_id: String,
    pub credential_type: String,
    #[serde(default)]
    pub required_claims: Vec<String>,
}

impl InputDescriptor {
    pub fn new(id: &str, credential_type: &str, claims: &[&str]) -> Self {
        Self {
            descriptor_id: id.to_string(),
            credential_type: credential_type.to_string(),
            required_claims: claims.iter().map(|c| c.to_string()).collect(),
        }
    }

    pub fn satisfied_by(&self, c: &Credential) -> bool {
        c.has_type(&self.credential_type) && self.required_claims.iter().all(|name| c.claims.contains_key(name))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentationDefinition {
    pub definition_id: String,
    pub input_descriptors: Vec<InputDescriptor>,
}

impl crate::model::Invariants for PresentationDefinition {
    fn violations(&self) -> Vec<crate::model::Violation> {
        let mut seen = BTreeSet::new();
        self.input_descriptors
            .iter()
            .filter(|d| !seen.insert(d.descriptor_id.as_str()))
            .map(|d| crate::model::Violation(format!("duplicate descriptor_id {}", d.descriptor_id)))
            .collect()
    }
}

/// descriptor_id -> credential_id
pub type Selection = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchOutcome {
    Selected(Selection),
    /// Descriptor ids no held credential satisfies.
    NoMatch(Vec<String>),
}

/// For each descriptor, the satisfying credential with the smallest id.
pub fn match_definition(definition: &PresentationDefinition, held: &[Credential]) -> MatchOutcome {
    let mut selection = Selection::new();
    let mut unsatisfied = Vec::new();
    for d in &definition.input_descriptors {
        match held.iter().filter(|c| d.satisfied_by(c)).map(|c| &c.credential_id).min() {
            Some(id) => {
                selection.insert(d.descriptor_id.clone(), id.clone());
            }
            None => unsatisfied.push(d.descriptor_id.clone()),
        }
    }
    if unsatisfied.is_empty() {
        MatchOutcome::Selected(selection)
    } else {
        MatchOutcome::NoMatch(unsatisfied)
    }
}

/// Checks a caller-chosen selection; returns the descriptor ids it leaves
/// unsatisfied (missing, unknown credential, or credential not fitting).
pub fn check_selection(
    definition: &PresentationDefinition,
    held: &[Credential],
    chosen: &Selection,
) -> Result<(), Vec<String>> {
    let unsatisfied: Vec<String> = definition
        .input_descriptors
        .iter()
        .filter(|d| {
            let fits = chosen
                .get(&d.descriptor_id)
                .and_then(|id| held.iter().find(|c| &c.credential_id == id))
                .is_some_and(|c| d.satisfied_by(c));
            !fits
        })
        .map(|d| d.descriptor_id.clone())
        .collect();
    if unsatisfied.is_empty() {
        Ok(())
    } else {
        Err(unsatisfied)
    }
}

/// Issuer DID -> credential types it is trusted for.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustedIssuerRegistry {
    entries: BTreeMap<String, BTreeSet<String>>,
}

impl TrustedIssuerRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn allow<I, S>(&mut self, issuer_did: &str, types: I) -> Result<(), VcError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = types.into_iter().map(Into::into).collect();
        if set.is_empty() {
            return Err(VcError::Registry(format!("{issuer_did}: empty allowed-type list")));
        }
        self.entries.entry(issuer_did.to_string()).or_default().extend(set);
        Ok(())
    }

    pub fn remove(&mut self, issuer_did: &str) -> bool {
        self.entries.remove(issuer_did).is_some()
    }

    pub fn contains(&self, issuer_did: &str) -> bool {
        self.entries.contains_key(issuer_did)
    }

    /// True when the issuer is trusted for at least one of the credential's
    /// specific (non-base) types.
    pub fn trusts(&self, credential: &Credential) -> bool {
        self.entries
            .get(&credential.issuer_did)
            .is_some_and(|allowed| credential.types.iter().any(|t| t != BASE_CREDENTIAL_TYPE && allowed.contains(t)))
    }

    /// Line format: `<issuer-did> <Type>[,<Type>...]`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, VcError> {
        let mut registry = Self::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let did = fields.next().unwrap_or_default();
            let types: Vec<&str> = fields.flat_map(|f| f.split(',')).filter(|t| !t.is_empty()).collect();
            if !crate::model::is_did_web(did) {
                return Err(VcError::Registry(format!("line {}: {did:?} is not a did:web", n + 1)));
            }
            registry.allow(did, types).map_err(|e| VcError::Registry(format!("line {}: {e}", n + 1)))?;
        }
        Ok(registry)
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(did, types)| format!("{did} {}\n", types.iter().cloned().collect::<Vec<_>>().join(",")))
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self, VcError> {
        let text = std::fs::read_to_string(path).map_err(|e| VcError::Registry(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresentationMode {
    /// Wallet flow: bound to the verifier audience and a server nonce.
    SessionBound,
    /// Published presentation: no audience, no nonce.
    Linked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Error)]
pub enum PresentationRejection {
    #[error("holder proof does not verify")]
    BadHolderProof,
    #[error("issuer proof does not verify")]
    BadIssuerProof,
    #[error("issuer is not trusted for this credential type")]
    UntrustedIssuer,
    #[error("credential outside its validity window")]
    Expired,
    #[error("audience does not match")]
    AudienceMismatch,
    #[error("nonce does not match")]
    NonceMismatch,
    #[error("presentation shape does not fit the validation mode")]
    ModeViolation,
    #[error("credential subject is not the holder")]
    SubjectMismatch,
}

impl PresentationRejection {
    pub fn label(self) -> &'static str {
        match self {
            Self::BadHolderProof => "BadHolderProof",
            Self::BadIssuerProof => "BadIssuerProof",
            Self::UntrustedIssuer => "UntrustedIssuer",
            Self::Expired => "Expired",
            Self::AudienceMismatch => "AudienceMismatch",
            Self::NonceMismatch => "NonceMismatch",
            Self::ModeViolation => "ModeViolation",
            Self::SubjectMismatch => "SubjectMismatch",
        }
    }
}

/// A disclosed claim value and the credential it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributedClaim {
    pub value: Value,
    pub credential_id: String,
}

/// Claim name -> value. On name collisions the credential with the smaller
/// id wins.
pub type SubjectClaims = BTreeMap<String, AttributedClaim>;

/// Individual checks of [`validate_presentation`]; all on by default. The
/// conformance harness switches single checks off to show each is load-bearing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentationChecks {
    pub holder_proof: bool,
    pub issuer_proof: bool,
    pub issuer_registry: bool,
    pub validity: bool,
    pub audience_nonce: bool,
}

impl Default for PresentationChecks {
    fn default() -> Self {
        Self { holder_proof: true, issuer_proof: true, issuer_registry: true, validity: true, audience_nonce: true }
    }
}

pub struct Verifier<'a> {
    pub registry: &'a TrustedIssuerRegistry,
    pub resolver: &'a dyn ResolveDid,
    pub now: Timestamp,
    pub checks: PresentationChecks,
}

impl Verifier<'_> {
    fn proof_verifies(&self, did: &str, envelope: &SignedEnvelope, payload: &[u8], ctx: &str) -> bool {
        let Ok(doc) = self.resolver.resolve(did) else {
            return false;
        };
        doc.key(&envelope.key_id).is_some_and(|key| crypto::verify(envelope, payload, ctx, key))
    }

    pub fn validate(
        &self,
        p: &Presentation,
        mode: PresentationMode,
        expected_audience: Option<&str>,
        expected_nonce: Option<&str>,
    ) -> Result<SubjectClaims, PresentationRejection> {
        use PresentationRejection::*;
        match mode {
            PresentationMode::Linked => {
                if p.nonce.is_some() || p.audience.is_some() {
                    return Err(ModeViolation);
                }
            }
            PresentationMode::SessionBound => {
                if p.nonce.is_none() || p.audience.is_none() || expected_audience.is_none() || expected_nonce.is_none()
                {
                    return Err(ModeViolation);
                }
            }
        }
        if self.checks.holder_proof
            && !self.proof_verifies(&p.holder_did, &p.proof, &p.signed_bytes(), context::VP_PROOF)
        {
            return Err(BadHolderProof);
        }
        if mode == PresentationMode::SessionBound && self.checks.audience_nonce {
            if p.audience.as_deref() != expected_audience {
                return Err(AudienceMismatch);
            }
            if p.nonce.as_deref() != expected_nonce {
                return Err(NonceMismatch);
            }
        }
        for c in &p.credentials {
            if c.subject_did != p.holder_did {
                return Err(SubjectMismatch);
            }
            if self.checks.issuer_registry && !self.registry.trusts(c) {
                return Err(UntrustedIssuer);
            }
            if self.checks.issuer_proof
                && !self.proof_verifies(&c.issuer_did, &c.proof, &c.signed_bytes(), context::CREDENTIAL)
            {
                return Err(BadIssuerProof);
            }
            if self.checks.validity && !c.is_valid_at(self.now) {
                return Err(Expired);
            }
        }
        let mut claims = SubjectClaims::new();
        let mut ordered: Vec<&Credential> = p.credentials.iter().collect();
        ordered.sort_by(|a, b| a.credential_id.cmp(&b.credential_id));
        for c in ordered {
            for (name, value) in &c.claims {
                claims.entry(name.clone()).or_insert_with(|| AttributedClaim {
                    value: value.clone(),
                    credential_id: c.credential_id.clone(),
                });
            }
        }
        Ok(claims)
    }
}

pub fn validate_presentation(
    p: &Presentation,
    mode: PresentationMode,
    expected_audience: Option<&str>,
    expected_nonce: Option<&str>,
    registry: &TrustedIssuerRegistry,
    resolver: &dyn ResolveDid,
    now: Timestamp,
) -> Result<SubjectClaims, PresentationRejection> {
    Verifier { registry, resolver, now, checks: PresentationChecks::default() }.validate(
        p,
        mode,
        expected_audience,
        expected_nonce,
    )
}

/// A wallet's credentials, all issued to `holder_did`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CredentialStore {
    pub holder_did: String,
    pub credentials: Vec<Credential>,
}

impl CredentialStore {
    pub fn new(holder_did: impl Into<String>) -> Self {
        Self { holder_did: holder_did.into(), credentials: Vec::new() }
    }

    pub fn add(&mut self, credential: Credential) -> Result<(), VcError> {
        if credential.subject_did != self.holder_did {
            return Err(VcError::SubjectMismatch {
                credential_id: credential.credential_id,
                subject: credential.subject_did,
                holder: self.holder_did.clone(),
            });
        }
        self.credentials.push(credential);
        Ok(())
    }

    pub fn get(&self, credential_id: &str) -> Option<&Credential> {
        self.credentials.iter().find(|c| c.credential_id == credential_id)
    }

    pub fn load(path: &Path) -> Result<Self, VcError> {
        let text = std::fs::read(path).map_err(|e| VcError::Store(format!("{}: {e}", path.display())))?;
        let raw: CredentialStore = serde_json::from_slice(&text).map_err(|e| VcError::Store(e.to_string()))?;
        let mut store = CredentialStore::new(raw.holder_did);
        for c in raw.credentials {
            store.add(c)?;
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<(), VcError> {
        let body = serde_json::to_vec_pretty(self).expect("store serializes");
        std::fs::write(path, body).map_err(|e| VcError::Store(format!("{}: {e}", path.display())))
    }
}
