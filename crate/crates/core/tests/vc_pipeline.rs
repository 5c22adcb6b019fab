//! Honest issue -> match -> build -> validate pipelines always accept; a
//! single mutation always rejects with the reason that mutation targets.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use gnap4vp_core::crypto::KeyPair;
use gnap4vp_core::did::{DidDocument, DidError, ResolveDid};
use gnap4vp_core::random::RandomSource;
use gnap4vp_core::vc::*;
use proptest::prelude::*;
use serde_json::json;

struct StaticResolver(HashMap<String, Arc<DidDocument>>);

impl ResolveDid for StaticResolver {
    fn resolve(&self, did: &str) -> Result<Arc<DidDocument>, DidError> {
        self.0.get(did).cloned().ok_or_else(|| DidError::FetchFailed(did.into()))
    }
}

const HOLDER: &str = "did:web:consumer.example";
const ISSUERS: [&str; 2] = ["did:web:issuer-a.example", "did:web:issuer-b.example"];
const TYPES: [&str; 3] = ["MembershipCredential", "RoleCredential", "ComplianceCredential"];

struct Pipeline {
    registry: TrustedIssuerRegistry,
    resolver: StaticResolver,
    issuer_keys: Vec<KeyPair>,
    holder: KeyPair,
    held: Vec<Credential>,
    definition: PresentationDefinition,
}

fn pipeline(seed: u64, n_creds: usize, n_desc: usize) -> Pipeline {
    let rng = RandomSource::seeded(seed, "vc-pipeline");
    let holder = KeyPair::generate(format!("{HOLDER}#key-1"), &rng);
    let issuer_keys: Vec<KeyPair> = ISSUERS.iter().map(|d| KeyPair::generate(format!("{d}#key-1"), &rng)).collect();
    let mut docs = HashMap::new();
    docs.insert(HOLDER.to_string(), Arc::new(DidDocument::new(HOLDER).with_key(holder.public_key())));
    let mut registry = TrustedIssuerRegistry::new();
    for (did, k) in ISSUERS.iter().zip(&issuer_keys) {
        docs.insert(did.to_string(), Arc::new(DidDocument::new(*did).with_key(k.public_key())));
        registry.allow(did, TYPES).unwrap();
    }
    let held: Vec<Credential> = (0..n_creds)
        .map(|i| {
            let issuer = (rng.next_u64() % 2) as usize;
            let t = TYPES[(rng.next_u64() % 3) as usize];
            issue_credential(
                &issuer_keys[issuer],
                CredentialDraft {
                    credential_id: Some(format!("urn:vc:{i}")),
                    types: vec![t.into()],
                    issuer_did: ISSUERS[issuer].into(),
                    subject_did: HOLDER.into(),
                    claims: BTreeMap::from([
                        ("kind".to_string(), json!(t)),
                        (format!("c{}", rng.next_u64() % 3), json!(rng.next_u64() % 100)),
                    ]),
                    valid_from: 1_000,
                    valid_until: 2_000 + (rng.next_u64() % 1_000) as i64,
                },
            )
            .unwrap()
        })
        .collect();
    // Descriptors copied from held credentials so a match always exists.
    let input_descriptors = (0..n_desc)
        .map(|i| {
            let c = &held[(rng.next_u64() as usize) % held.len()];
            InputDescriptor {
                descriptor_id: format!("d{i}"),
                credential_type: c.types[1].clone(),
                required_claims: c.claims.keys().take(1 + (rng.next_u64() % 2) as usize).cloned().collect(),
            }
        })
        .collect();
    Pipeline {
        registry,
        resolver: StaticResolver(docs),
        issuer_keys,
        holder,
        held,
        definition: PresentationDefinition { definition_id: "def".into(), input_descriptors },
    }
}

impl Pipeline {
    fn selected(&self) -> Vec<Credential> {
        let MatchOutcome::Selected(sel) = match_definition(&self.definition, &self.held) else {
            panic!("definition built from held credentials must match");
        };
        let mut ids: Vec<&String> = sel.values().collect();
        ids.sort();
        ids.dedup();
        ids.into_iter().map(|id| self.held.iter().find(|c| &c.credential_id == id).unwrap().clone()).collect()
    }

    fn validate(
        &self,
        p: &Presentation,
        aud: &str,
        nonce: &str,
        now: i64,
    ) -> Result<SubjectClaims, PresentationRejection> {
        validate_presentation(
            p,
            PresentationMode::SessionBound,
            Some(aud),
            Some(nonce),
            &self.registry,
            &self.resolver,
            now,
        )
    }
}

#[derive(Debug, Clone, Copy)]
enum Mutation {
    CredentialClaim,
    CredentialValidity,
    PresentationNonce,
    PresentationAudience,
    PresentationDropCredential,
    ExpectedAudience,
    ExpectedNonce,
    ClockPastExpiry,
    RemoveIssuer,
}

const MUTATIONS: [Mutation; 9] = [
    Mutation::CredentialClaim,
    Mutation::CredentialValidity,
    Mutation::PresentationNonce,
    Mutation::PresentationAudience,
    Mutation::PresentationDropCredential,
    Mutation::ExpectedAudience,
    Mutation::ExpectedNonce,
    Mutation::ClockPastExpiry,
    Mutation::RemoveIssuer,
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn honest_accepts_and_single_mutation_rejects(
        seed in any::<u64>(),
        n_creds in 1usize..6,
        n_desc in 1usize..4,
        which in 0usize..MUTATIONS.len(),
    ) {
        let mut pl = pipeline(seed, n_creds, n_desc);
        let chosen = pl.selected();
        let (aud, nonce, now) = ("https://provider.example", "server-nonce", 1_500);
        let honest = build_presentation(&pl.holder, HOLDER, &chosen, Some(aud), Some(nonce)).unwrap();
        let claims = pl.validate(&honest, aud, nonce, now).unwrap();
        for c in &chosen {
            for name in c.claims.keys() {
                prop_assert!(claims.contains_key(name));
            }
        }

        use PresentationRejection::*;
        let mutation = MUTATIONS[which];
        let outcome = match mutation {
            Mutation::CredentialClaim | Mutation::CredentialValidity => {
                let mut tampered = chosen.clone();
                match mutation {
                    Mutation::CredentialClaim => { tampered[0].claims.insert("kind".into(), json!("forged")); }
                    _ => tampered[0].valid_until += 1_000_000,
                }
                let p = build_presentation(&pl.holder, HOLDER, &tampered, Some(aud), Some(nonce)).unwrap();
                (pl.validate(&p, aud, nonce, now), BadIssuerProof)
            }
            Mutation::PresentationNonce => {
                let mut p = honest.clone();
                p.nonce = Some("other".into());
                (pl.validate(&p, aud, nonce, now), BadHolderProof)
            }
            Mutation::PresentationAudience => {
                let mut p = honest.clone();
                p.audience = Some("https://evil.example".into());
                (pl.validate(&p, aud, nonce, now), BadHolderProof)
            }
            Mutation::PresentationDropCredential => {
                let mut p = honest.clone();
                p.credentials.pop();
                (pl.validate(&p, aud, nonce, now), BadHolderProof)
            }
            Mutation::ExpectedAudience => (pl.validate(&honest, "https://other.example", nonce, now), AudienceMismatch),
            Mutation::ExpectedNonce => (pl.validate(&honest, aud, "fresh-nonce", now), NonceMismatch),
            Mutation::ClockPastExpiry => (pl.validate(&honest, aud, nonce, 3_001), Expired),
            Mutation::RemoveIssuer => {
                pl.registry.remove(&chosen[0].issuer_did);
                (pl.validate(&honest, aud, nonce, now), UntrustedIssuer)
            }
        };
        prop_assert_eq!(outcome.0, Err(outcome.1), "mutation {:?}", mutation);
        let _ = &pl.issuer_keys;
    }
}
