//! Test identities and the DID/LVP web host that serves them.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use gnap4vp_core::crypto::KeyPair;
use gnap4vp_core::did::{DidDocument, LVP_SERVICE_TYPE};
use gnap4vp_core::random::RandomSource;
use gnap4vp_core::transport::{HttpRequest, HttpResponse, Router, Service};
use gnap4vp_core::vc::{
    build_presentation, issue_credential, Credential, CredentialDraft, CredentialStore, Presentation,
    TrustedIssuerRegistry,
};
use serde_json::json;

pub const T0: i64 = 1_760_000_000;

pub const CONSUMER_AUTHORITY: &str = "consumer.example";
pub const PROVIDER_AUTHORITY: &str = "provider.example";
pub const WALLET_AUTHORITY: &str = "wallet.example";
pub const ISSUER_AUTHORITY: &str = "issuer.example";

pub const CONSUMER_ORIGIN: &str = "https://consumer.example";
pub const PROVIDER_ORIGIN: &str = "https://provider.example";
pub const WALLET_ORIGIN: &str = "https://wallet.example";

pub const CONSUMER_DID: &str = "did:web:consumer.example";
pub const ISSUER_DID: &str = "did:web:issuer.example";

pub const MEMBERSHIP_TYPE: &str = "MembershipCredential";
pub const MEMBERSHIP_CLAIM: &str = "member_id";
pub const RIGHT: &str = "membership";
pub const RESOURCE_PATH: &str = "/api/data";

pub fn resource_payload() -> serde_json::Value {
    json!({"dataset": "shipments-2025", "rows": 3})
}

/// Keys, documents and credentials for one run.
#[derive(Clone)]
pub struct Identities {
    pub consumer_key: KeyPair,
    pub issuer_key: KeyPair,
    /// Same key id as the consumer's, different secret.
    pub attacker_key: KeyPair,
    pub membership: Credential,
    /// Held by the wallet but never requested.
    pub unrelated: Credential,
    pub lvp: Presentation,
    pub consumer_doc: DidDocument,
    pub issuer_doc: DidDocument,
}

fn credential(
    issuer: &KeyPair,
    id: &str,
    subject: &str,
    ty: &str,
    claims: BTreeMap<String, serde_json::Value>,
) -> Credential {
    issue_credential(
        issuer,
        CredentialDraft {
            credential_id: Some(id.into()),
            types: vec!["VerifiableCredential".into(), ty.into()],
            issuer_did: ISSUER_DID.into(),
            subject_did: subject.into(),
            claims,
            valid_from: T0 - 86_400,
            valid_until: T0 + 30 * 86_400,
        },
    )
    .expect("fixture credentials are well-formed")
}

impl Identities {
    pub fn generate(seed: u64) -> Self {
        let rng = RandomSource::seeded(seed, "fixtures");
        let consumer_key = KeyPair::generate(format!("{CONSUMER_DID}#key-1"), &rng);
        let issuer_key = KeyPair::generate(format!("{ISSUER_DID}#key-1"), &rng);
        let attacker_key = KeyPair::generate(format!("{CONSUMER_DID}#key-1"), &rng);
        let membership = credential(
            &issuer_key,
            "urn:uuid:membership-1",
            CONSUMER_DID,
            MEMBERSHIP_TYPE,
            BTreeMap::from([(MEMBERSHIP_CLAIM.to_string(), json!("DS-0042"))]),
        );
        let unrelated = credential(
            &issuer_key,
            "urn:uuid:employee-1",
            CONSUMER_DID,
            "EmployeeCredential",
            BTreeMap::from([("employee_no".to_string(), json!("E-7"))]),
        );
        let lvp = build_presentation(&consumer_key, CONSUMER_DID, std::slice::from_ref(&membership), None, None)
            .expect("holder owns the credential");
        let consumer_doc = DidDocument::new(CONSUMER_DID).with_key(consumer_key.public_key()).with_service(
            "#lvp",
            LVP_SERVICE_TYPE,
            &format!("{CONSUMER_ORIGIN}/lvp"),
        );
        let issuer_doc = DidDocument::new(ISSUER_DID).with_key(issuer_key.public_key());
        Self { consumer_key, issuer_key, attacker_key, membership, unrelated, lvp, consumer_doc, issuer_doc }
    }

    pub fn registry(&self, trust_issuer: bool) -> TrustedIssuerRegistry {
        let mut r = TrustedIssuerRegistry::new();
        if trust_issuer {
            r.allow(ISSUER_DID, [MEMBERSHIP_TYPE, "EmployeeCredential"]).expect("valid issuer did");
        }
        r
    }

    pub fn wallet_store(&self) -> CredentialStore {
        let mut store = CredentialStore::new(CONSUMER_DID);
        store.add(self.unrelated.clone()).expect("holder credential");
        store.add(self.membership.clone()).expect("holder credential");
        store
    }
}

fn json_body(body: Vec<u8>) -> Arc<dyn Service> {
    Arc::new(move |_: &HttpRequest| {
        let mut r = HttpResponse::new(200, body.clone());
        r.headers.push(("content-type".into(), "application/json".into()));
        r
    })
}

/// `/.well-known/did.json` and `/lvp` for the consumer origin.
pub fn consumer_web_host(ids: &Identities) -> Router {
    Router::new()
        .route("/.well-known/did.json", json_body(ids.consumer_doc.to_json()))
        .route("/lvp", json_body(serde_json::to_vec(&ids.lvp).expect("presentation serializes")))
}

pub fn issuer_web_host(ids: &Identities) -> Router {
    Router::new().route("/.well-known/did.json", json_body(ids.issuer_doc.to_json()))
}

/// Writes an issuer plus `count` holder identities under `dir`:
/// `issuer/{key,did}.json`, `registry.txt`, and per holder
/// `holder-N/{key,did,credential,lvp,store}.json`.
pub fn write_fixtures(dir: &Path, count: usize, seed: u64) -> std::io::Result<Vec<String>> {
    let rng = RandomSource::seeded(seed, "fixture-cli");
    let issuer_key = KeyPair::generate(format!("{ISSUER_DID}#key-1"), &rng);
    let issuer_dir = dir.join("issuer");
    std::fs::create_dir_all(&issuer_dir)?;
    issuer_key.save(&issuer_dir.join("key.json")).map_err(std::io::Error::other)?;
    std::fs::write(
        issuer_dir.join("did.json"),
        DidDocument::new(ISSUER_DID).with_key(issuer_key.public_key()).to_json(),
    )?;
    let mut registry = TrustedIssuerRegistry::new();
    registry.allow(ISSUER_DID, [MEMBERSHIP_TYPE]).map_err(std::io::Error::other)?;
    std::fs::write(dir.join("registry.txt"), registry.to_text())?;

    let mut dids = Vec::with_capacity(count);
    for i in 0..count {
        let did = format!("did:web:holder-{i}.example");
        let key = KeyPair::generate(format!("{did}#key-1"), &rng);
        let cred = credential(
            &issuer_key,
            &format!("urn:uuid:membership-{i}"),
            &did,
            MEMBERSHIP_TYPE,
            BTreeMap::from([(MEMBERSHIP_CLAIM.to_string(), json!(format!("DS-{i:04}")))]),
        );
        let lvp =
            build_presentation(&key, &did, std::slice::from_ref(&cred), None, None).map_err(std::io::Error::other)?;
        let doc = DidDocument::new(did.clone()).with_key(key.public_key()).with_service(
            "#lvp",
            LVP_SERVICE_TYPE,
            &format!("https://holder-{i}.example/lvp"),
        );
        let mut store = CredentialStore::new(did.clone());
        store.add(cred.clone()).map_err(std::io::Error::other)?;

        let hd = dir.join(format!("holder-{i}"));
        std::fs::create_dir_all(&hd)?;
        key.save(&hd.join("key.json")).map_err(std::io::Error::other)?;
        std::fs::write(hd.join("did.json"), doc.to_json())?;
        std::fs::write(hd.join("credential.json"), serde_json::to_vec_pretty(&cred)?)?;
        std::fs::write(hd.join("lvp.json"), serde_json::to_vec_pretty(&lvp)?)?;
        store.save(&hd.join("store.json")).map_err(std::io::Error::other)?;
        dids.push(did);
    }
    Ok(dids)
}
