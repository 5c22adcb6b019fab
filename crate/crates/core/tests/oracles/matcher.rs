//! `match_definition` against an exhaustive brute-force matcher.
//!
//! The oracle enumerates every assignment of held credentials to descriptors,
//! keeps only the fully satisfying ones and picks the lexicographically
//! smallest assignment by credential id. No code is shared with the
//! implementation beyond the data types.

use std::collections::BTreeMap;

use gnap4vp_core::crypto::Algorithm;
use gnap4vp_core::crypto::SignedEnvelope;
use gnap4vp_core::random::RandomSource;
use gnap4vp_core::vc::{Credential, InputDescriptor, MatchOutcome, PresentationDefinition};

const TYPES: [&str; 3] = ["MembershipCredential", "RoleCredential", "AuditCredential"];
const CLAIMS: [&str; 4] = ["memberOf", "role", "country", "level"];

pub fn brute_force(def: &PresentationDefinition, held: &[Credential]) -> MatchOutcome {
    let fits = |d: &InputDescriptor, c: &Credential| {
        c.types.contains(&d.credential_type) && d.required_claims.iter().all(|r| c.claims.keys().any(|k| k == r))
    };
    let n = def.input_descriptors.len();
    let m = held.len();
    let mut best: Option<Vec<String>> = None;
    if m > 0 || n == 0 {
        let total = (m.max(1) as u64).pow(n as u32);
        for code in 0..total {
            let mut idx = code;
            let mut ids = Vec::with_capacity(n);
            let mut ok = true;
            for d in &def.input_descriptors {
                let c = &held[(idx % m.max(1) as u64) as usize];
                idx /= m.max(1) as u64;
                if !fits(d, c) {
                    ok = false;
                    break;
                }
                ids.push(c.credential_id.clone());
            }
            if ok && best.as_ref().is_none_or(|b| ids < *b) {
                best = Some(ids);
            }
        }
    }
    match best {
        Some(ids) => {
            MatchOutcome::Selected(def.input_descriptors.iter().map(|d| d.descriptor_id.clone()).zip(ids).collect())
        }
        None => {
            let unsat = def
                .input_descriptors
                .iter()
                .filter(|d| !held.iter().any(|c| fits(d, c)))
                .map(|d| d.descriptor_id.clone())
                .collect();
            MatchOutcome::NoMatch(unsat)
        }
    }
}

fn pick<'a>(rng: &RandomSource, items: &[&'a str]) -> &'a str {
    items[(rng.next_u64() % items.len() as u64) as usize]
}

fn subset(rng: &RandomSource, items: &[&str]) -> Vec<String> {
    items.iter().filter(|_| rng.next_u64().is_multiple_of(2)).map(|s| s.to_string()).collect()
}

pub fn credential(rng: &RandomSource, id: usize) -> Credential {
    let mut types = vec!["VerifiableCredential".to_string()];
    types.extend(subset(rng, &TYPES));
    let claims: BTreeMap<String, serde_json::Value> =
        subset(rng, &CLAIMS).into_iter().map(|c| (c, serde_json::json!(1))).collect();
    Credential {
        // Ids drawn out of insertion order so the tie-break is exercised.
        credential_id: format!("urn:vc:{:02}", (rng.next_u64() % 50) * 100 + id as u64),
        types,
        issuer_did: "did:web:issuer.example".into(),
        subject_did: "did:web:holder.example".into(),
        claims,
        valid_from: 0,
        valid_until: 1,
        proof: SignedEnvelope {
            algorithm: Algorithm::Ed25519,
            key_id: String::new(),
            payload_digest: vec![],
            signature: vec![],
        },
    }
}

pub fn definition(rng: &RandomSource, n: usize) -> PresentationDefinition {
    PresentationDefinition {
        definition_id: "def".into(),
        input_descriptors: (0..n)
            .map(|i| InputDescriptor {
                descriptor_id: format!("d{i}"),
                credential_type: pick(rng, &TYPES).to_string(),
                required_claims: subset(rng, &CLAIMS[..3]),
            })
            .collect(),
    }
}
