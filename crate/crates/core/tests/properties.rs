use std::collections::BTreeMap;

use gnap4vp_core::canonical::{canonical_bytes, from_canonical};
use gnap4vp_core::crypto::{self, interaction_hash, KeyPair};
use gnap4vp_core::did::did_web_to_url;
use gnap4vp_core::model::*;
use gnap4vp_core::random::RandomSource;
use gnap4vp_core::vc::{InputDescriptor, PresentationDefinition};
use proptest::prelude::*;

fn key(seed: u64) -> KeyPair {
    KeyPair::generate("did:web:consumer.example#key-1", &RandomSource::seeded(seed, "prop"))
}

fn text() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9 _\\-:/.ü\"\\\\]{0,24}"
}

fn nonce() -> impl Strategy<Value = String> {
    "[A-Za-z0-9_-]{22,32}"
}

fn right() -> impl Strategy<Value = AccessRight> {
    (text(), prop::collection::vec(text(), 0..3)).prop_map(|(label, actions)| AccessRight { label, actions })
}

fn metadata() -> impl Strategy<Value = SignedClientMetadata> {
    (0i64..2_000_000_000, 1i64..300, text(), any::<u64>()).prop_map(|(from, len, aud, seed)| {
        ClientMetadata {
            valid_from: from,
            valid_until: from + len,
            audience: aud,
            did: "did:web:consumer.example".into(),
            key_id: "did:web:consumer.example#key-1".into(),
        }
        .sign(&key(seed))
        .unwrap()
    })
}

fn grant_request() -> impl Strategy<Value = GrantRequest> {
    (
        prop::collection::vec(right(), 1..3),
        prop::option::of(metadata()),
        prop::option::of(text()),
        prop::option::of((nonce(), prop::bool::ANY)),
        any::<u64>(),
    )
        .prop_map(|(access, metadata, display_name, interact, seed)| GrantRequest {
            access,
            client: ClientIdentity {
                did: "did:web:consumer.example".into(),
                key: Some(key(seed).public_key()),
                metadata,
                display_name,
            },
            flow_preferences: if interact.is_some() {
                vec![FlowId::WalletInteraction, FlowId::LvpAuthorization]
            } else {
                vec![FlowId::LvpAuthorization]
            },
            interact: interact.map(|(client_nonce, push)| InteractionSpec {
                callback_uri: "https://consumer.example/callback?session=s".into(),
                callback_mode: if push { CallbackMode::Push } else { CallbackMode::Redirect },
                client_nonce,
            }),
        })
}

fn exchange() -> impl Strategy<Value = ExchangeRecord> {
    (text(), text(), nonce(), 0usize..5, any::<i64>(), prop::collection::vec(text(), 0..3)).prop_map(
        |(ex, grant, server_nonce, status, created_at, claims)| {
            let status = ExchangeStatus::ALL[status];
            ExchangeRecord {
                exchange_id: ex,
                grant_id: grant,
                definition: PresentationDefinition {
                    definition_id: "d".into(),
                    input_descriptors: vec![InputDescriptor {
                        descriptor_id: "x".into(),
                        credential_type: "T".into(),
                        required_claims: claims,
                    }],
                },
                server_nonce,
                interaction_ref: (status == ExchangeStatus::Authorized).then(|| "ref".to_string()),
                status,
                created_at,
            }
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn grant_request_round_trips(req in grant_request()) {
        let bytes = canonical_bytes(&req);
        let back: GrantRequest = from_canonical(&bytes).unwrap();
        prop_assert_eq!(&back, &req);
        prop_assert_eq!(canonical_bytes(&back), bytes);
    }

    #[test]
    fn exchange_record_round_trips(rec in exchange()) {
        let back: ExchangeRecord = from_canonical(&canonical_bytes(&rec)).unwrap();
        prop_assert_eq!(back, rec);
    }

    #[test]
    fn callback_and_response_round_trip(r in nonce(), h in nonce(), seed in any::<u64>(), exp in any::<i64>()) {
        let params = CallbackParams { interaction_ref: r.clone(), interaction_hash: h };
        let back: CallbackParams = from_canonical(&canonical_bytes(&params)).unwrap();
        prop_assert_eq!(back, params);
        let resp = GrantResponse {
            selected_flow: FlowId::LvpAuthorization,
            continue_info: None,
            interact_info: None,
            access_token: Some(AccessToken {
                value: r,
                bound_key: key(seed).public_key(),
                rights: vec![AccessRight::new("data.read", &["read"])],
                expires_at: exp,
            }),
            subject_info: Some(BTreeMap::new()),
        };
        prop_assert!(resp.violations().is_empty());
        let back: GrantResponse = from_canonical(&canonical_bytes(&resp)).unwrap();
        prop_assert_eq!(back, resp);
    }

    #[test]
    fn key_order_does_not_matter(req in grant_request()) {
        // Re-encode through serde_json's own writer (insertion order) and back.
        let loose = serde_json::to_vec(&req).unwrap();
        let reparsed: GrantRequest = serde_json::from_slice(&loose).unwrap();
        prop_assert_eq!(canonical_bytes(&reparsed), canonical_bytes(&req));
    }

    #[test]
    fn hash_is_43_chars_and_order_sensitive(a in nonce(), b in nonce(), r in nonce(), u in text()) {
        prop_assume!(a != b && !u.is_empty());
        let h1 = interaction_hash(&a, &b, &r, &u).unwrap();
        let h2 = interaction_hash(&b, &a, &r, &u).unwrap();
        prop_assert_eq!(h1.len(), 43);
        prop_assert_ne!(h1, h2);
    }

    #[test]
    fn did_web_urls_are_injective(
        h1 in "[a-z]{1,8}(\\.[a-z]{2,4}){0,2}", s1 in prop::collection::vec("[a-z0-9]{1,6}", 0..4),
        h2 in "[a-z]{1,8}(\\.[a-z]{2,4}){0,2}", s2 in prop::collection::vec("[a-z0-9]{1,6}", 0..4),
    ) {
        let d1 = std::iter::once(h1.clone()).chain(s1.clone()).collect::<Vec<_>>().join(":");
        let d2 = std::iter::once(h2.clone()).chain(s2.clone()).collect::<Vec<_>>().join(":");
        let u1 = did_web_to_url(&format!("did:web:{d1}")).unwrap();
        let u2 = did_web_to_url(&format!("did:web:{d2}")).unwrap();
        prop_assert_eq!(d1 == d2, u1 == u2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn any_single_bit_flip_breaks_signature(
        payload in prop::collection::vec(any::<u8>(), 1..256),
        bit in any::<prop::sample::Index>(),
        seed in 0u64..8,
    ) {
        let k = key(seed);
        let env = crypto::sign(&payload, crypto::context::CREDENTIAL, &k).unwrap();
        prop_assert!(crypto::verify(&env, &payload, crypto::context::CREDENTIAL, &k.public_key()));
        let mut flipped = payload.clone();
        let i = bit.index(payload.len() * 8);
        flipped[i / 8] ^= 1 << (i % 8);
        prop_assert!(!crypto::verify(&env, &flipped, crypto::context::CREDENTIAL, &k.public_key()));
        // Envelopes never carry secret key material.
        let text = String::from_utf8(canonical_bytes(&env)).unwrap();
        let secret_line = k.to_key_file().lines().find(|l| l.starts_with("secret:")).unwrap().to_string();
        prop_assert!(!text.contains(secret_line.trim_start_matches("secret: ")));
    }
}
