//! did:web resolution.
//!
//! `did:web:<host>[:<seg>...]` maps to `https://<host>/.well-known/did.json`
//! (no segments) or `https://<host>/<seg>/.../did.json`. A `%3A` in the host
//! decodes to a port separator. Documents are fetched through an injectable
//! [`DocumentFetcher`] and cached per DID for a short TTL.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;
use crate::crypto::{Algorithm, PublicKey};
use crate::encoding::{b64url, b64url_decode};
use crate::model::Timestamp;

pub const LVP_SERVICE_TYPE: &str = "LinkedVerifiablePresentation";
pub const DEFAULT_CACHE_TTL_SECS: i64 = 60;
pub const DEFAULT_FETCH_TIMEOUT: Duration = Duration::from_secs(5);
pub const DEFAULT_MAX_DOCUMENT_BYTES: usize = 64 * 1024;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DidError {
    #[error("unsupported DID method: {0}")]
    UnsupportedMethod(String),
    #[error("malformed did:web identifier: {0}")]
    MalformedDid(String),
    #[error("fetch failed: {0}")]
    FetchFailed(String),
    #[error("DID document parse failed: {0}")]
    ParseFailed(String),
    #[error("DID document id {found:?} does not match requested {requested:?}")]
    IdMismatch { requested: String, found: String },
    #[error("no {LVP_SERVICE_TYPE} service in DID document")]
    NoLvpService,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FetchError {
    #[error("unreachable: {0}")]
    Unreachable(String),
    #[error("timed out")]
    Timeout,
    #[error("HTTP status {0}")]
    Status(u16),
    #[error("body exceeds {0} bytes")]
    TooLarge(usize),
}

impl From<FetchError> for DidError {
    fn from(e: FetchError) -> Self {
        DidError::FetchFailed(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FetchLimits {
    pub timeout: Duration,
    pub max_bytes: usize,
}

impl Default for FetchLimits {
    fn default() -> Self {
        Self { timeout: DEFAULT_FETCH_TIMEOUT, max_bytes: DEFAULT_MAX_DOCUMENT_BYTES }
    }
}

/// GETs a document; implementations enforce `limits`.
pub trait DocumentFetcher: Send + Sync {
    fn fetch(&self, url: &str, limits: &FetchLimits) -> Result<Vec<u8>, FetchError>;
}

fn percent_decode(text: &str) -> Option<String> {
    let bytes = text.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = text.get(i + 1..i + 3)?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}

pub fn did_web_to_url(did: &str) -> Result<String, DidError> {
    let Some(rest) = did.strip_prefix("did:web:") else {
        let method = did.strip_prefix("did:").and_then(|r| r.split(':').next()).unwrap_or(did);
        return Err(DidError::UnsupportedMethod(method.to_string()));
    };
    let malformed = |why: &str| DidError::MalformedDid(format!("{did}: {why}"));
    let mut parts = rest.split(':');
    let host = parts.next().unwrap_or_default();
    if host.is_empty() {
        return Err(malformed("empty host"));
    }
    let host = percent_decode(host).ok_or_else(|| malformed("bad percent-encoding in host"))?;
    if host.contains('/') || host.contains('#') || host.contains('?') || host.starts_with(':') {
        return Err(malformed("invalid host"));
    }
    let segments: Vec<&str> = parts.collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(malformed("empty path segment"));
    }
    if segments.iter().any(|s| *s == "." || *s == ".." || s.contains('/') || s.contains('%')) {
        return Err(malformed("invalid path segment"));
    }
    // `did:web:h:.well-known` would collide with `did:web:h`.
    if segments == [".well-known"] {
        return Err(malformed("reserved path"));
    }
    let url = if segments.is_empty() {
        format!("https://{host}/.well-known/did.json")
    } else {
        format!("https://{host}/{}/did.json", segments.join("/"))
    };
    url::Url::parse(&url).map_err(|e| malformed(&e.to_string()))?;
    Ok(url)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceEndpoint {
    pub id: String,
    pub service_type: String,
    pub endpoint: String,
}

/// A resolved DID document reduced to what the protocol consumes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DidDocument {
    pub id: String,
    pub verification_methods: BTreeMap<String, PublicKey>,
    pub services: Vec<ServiceEndpoint>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Jwk {
    kty: String,
    crv: String,
    x: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawVerificationMethod {
    id: String,
    #[serde(rename = "type")]
    method_type: String,
    controller: String,
    #[serde(rename = "publicKeyJwk")]
    public_key_jwk: Jwk,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawService {
    id: String,
    #[serde(rename = "type")]
    service_type: String,
    #[serde(rename = "serviceEndpoint")]
    endpoint: serde_json::Value,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawDocument {
    #[serde(rename = "@context", default, skip_serializing_if = "Option::is_none")]
    context: Option<serde_json::Value>,
    id: String,
    #[serde(rename = "verificationMethod", default)]
    verification_method: Vec<RawVerificationMethod>,
    #[serde(default)]
    service: Vec<RawService>,
}

impl DidDocument {
    pub fn new(id: impl Into<String>) -> Self {
        Self { id: id.into(), verification_methods: BTreeMap::new(), services: Vec::new() }
    }

    pub fn with_key(mut self, key: PublicKey) -> Self {
        self.verification_methods.insert(key.key_id.clone(), key);
        self
    }

    pub fn with_service(mut self, id: &str, service_type: &str, endpoint: &str) -> Self {
        self.services.push(ServiceEndpoint {
            id: id.to_string(),
            service_type: service_type.to_string(),
            endpoint: endpoint.to_string(),
        });
        self
    }

    fn absolute_ref(&self, key_ref: &str) -> String {
        if key_ref.starts_with('#') {
            format!("{}{key_ref}", self.id)
        } else {
            key_ref.to_string()
        }
    }

    /// Looks up a verification method by absolute or `#fragment` reference.
    pub fn key(&self, key_ref: &str) -> Option<&PublicKey> {
        self.verification_methods.get(&self.absolute_ref(key_ref))
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, DidError> {
        let raw: RawDocument = serde_json::from_slice(bytes).map_err(|e| DidError::ParseFailed(e.to_string()))?;
        let mut doc = DidDocument::new(raw.id);
        for vm in raw.verification_method {
            if vm.public_key_jwk.kty != "OKP" || vm.public_key_jwk.crv != "Ed25519" {
                return Err(DidError::ParseFailed(format!(
                    "{}: unsupported key {} / {}",
                    vm.id, vm.public_key_jwk.kty, vm.public_key_jwk.crv
                )));
            }
            let public =
                b64url_decode(&vm.public_key_jwk.x).map_err(|e| DidError::ParseFailed(format!("{}: {e}", vm.id)))?;
            let key_id = doc.absolute_ref(&vm.id);
            let key = PublicKey { key_id: key_id.clone(), algorithm: Algorithm::Ed25519, public };
            if doc.verification_methods.insert(key_id.clone(), key).is_some() {
                return Err(DidError::ParseFailed(format!("duplicate verification method {key_id}")));
            }
        }
        for svc in raw.service {
            let endpoint = match &svc.endpoint {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Array(items) => match items.first() {
                    Some(serde_json::Value::String(s)) => s.clone(),
                    _ => return Err(DidError::ParseFailed(format!("{}: unusable serviceEndpoint", svc.id))),
                },
                _ => return Err(DidError::ParseFailed(format!("{}: unusable serviceEndpoint", svc.id))),
            };
            doc.services.push(ServiceEndpoint { id: svc.id, service_type: svc.service_type, endpoint });
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> Vec<u8> {
        let raw = RawDocument {
            context: Some(serde_json::json!(["https://www.w3.org/ns/did/v1"])),
            id: self.id.clone(),
            verification_method: self
                .verification_methods
                .values()
                .map(|k| RawVerificationMethod {
                    id: k.key_id.clone(),
                    method_type: "JsonWebKey2020".into(),
                    controller: self.id.clone(),
                    public_key_jwk: Jwk { kty: "OKP".into(), crv: "Ed25519".into(), x: b64url(&k.public) },
                })
                .collect(),
            service: self
                .services
                .iter()
                .map(|s| RawService {
                    id: s.id.clone(),
                    service_type: s.service_type.clone(),
                    endpoint: serde_json::Value::String(s.endpoint.clone()),
                })
                .collect(),
        };
        serde_json::to_vec_pretty(&raw).expect("DID documents serialize")
    }
}

/// First `LinkedVerifiablePresentation` service in document order.
pub fn find_lvp_endpoint(doc: &DidDocument) -> Result<&str, DidError> {
    doc.services
        .iter()
        .find(|s| s.service_type == LVP_SERVICE_TYPE)
        .map(|s| s.endpoint.as_str())
        .ok_or(DidError::NoLvpService)
}

pub trait ResolveDid: Send + Sync {
    fn resolve(&self, did: &str) -> Result<Arc<DidDocument>, DidError>;
}

#[derive(Debug, Clone)]
struct CachedDocument {
    doc: Arc<DidDocument>,
    fetched_at: Timestamp,
}

/// Caching did:web resolver.
pub struct DidResolver {
    fetcher: Arc<dyn DocumentFetcher>,
    clock: Arc<dyn Clock>,
    limits: FetchLimits,
    ttl_secs: i64,
    cache: RwLock<HashMap<String, CachedDocument>>,
    fetches: AtomicUsize,
}

impl std::fmt::Debug for DidResolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DidResolver")
            .field("limits", &self.limits)
            .field("ttl_secs", &self.ttl_secs)
            .field("fetches", &self.fetches.load(Ordering::Relaxed))
            .finish_non_exhaustive()
    }
}

impl DidResolver {
    pub fn new(fetcher: Arc<dyn DocumentFetcher>, clock: Arc<dyn Clock>) -> Self {
        Self {
            fetcher,
            clock,
            limits: FetchLimits::default(),
            ttl_secs: DEFAULT_CACHE_TTL_SECS,
            cache: RwLock::new(HashMap::new()),
            fetches: AtomicUsize::new(0),
        }
    }

    pub fn with_limits(mut self, limits: FetchLimits) -> Self {
        self.limits = limits;
        self
    }

    /// A TTL of zero disables caching.
    pub fn with_ttl(mut self, ttl_secs: i64) -> Self {
        self.ttl_secs = ttl_secs;
        self
    }

    pub fn limits(&self) -> FetchLimits {
        self.limits
    }

    pub fn fetch_count(&self) -> usize {
        self.fetches.load(Ordering::Relaxed)
    }

    pub fn clear_cache(&self) {
        self.cache.write().expect("cache lock").clear();
    }

    fn cached(&self, did: &str, now: Timestamp) -> Option<Arc<DidDocument>> {
        let cache = self.cache.read().expect("cache lock");
        cache.get(did).filter(|c| now - c.fetched_at < self.ttl_secs).map(|c| Arc::clone(&c.doc))
    }

    fn fetch_uncached(&self, did: &str) -> Result<DidDocument, DidError> {
        let url = did_web_to_url(did)?;
        self.fetches.fetch_add(1, Ordering::Relaxed);
        let body = self.fetcher.fetch(&url, &self.limits)?;
        let doc = DidDocument::from_json(&body)?;
        if doc.id != did {
            return Err(DidError::IdMismatch { requested: did.to_string(), found: doc.id });
        }
        Ok(doc)
    }
}

impl ResolveDid for DidResolver {
    fn resolve(&self, did: &str) -> Result<Arc<DidDocument>, DidError> {
        let now = self.clock.now();
        if let Some(doc) = self.cached(did, now) {
            return Ok(doc);
        }
        let doc = Arc::new(self.fetch_uncached(did)?);
        if self.ttl_secs <= 0 {
            return Ok(doc);
        }
        let mut cache = self.cache.write().expect("cache lock");
        let entry = cache
            .entry(did.to_string())
            .and_modify(|c| {
                if now - c.fetched_at >= self.ttl_secs {
                    *c = CachedDocument { doc: Arc::clone(&doc), fetched_at: now };
                }
            })
            .or_insert_with(|| CachedDocument { doc: Arc::clone(&doc), fetched_at: now });
        Ok(Arc::clone(&entry.doc))
    }
}
