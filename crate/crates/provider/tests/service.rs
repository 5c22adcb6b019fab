mod common;

use std::sync::Arc;

use common::*;
use gnap4vp_core::crypto::{self, KeyPair, ProofRejection, HASH_B64_LEN};
use gnap4vp_core::did::DidDocument;
use gnap4vp_core::model::*;
use gnap4vp_core::random::RandomSource;
use gnap4vp_core::transport::{HttpRequest, HttpResponse};
use gnap4vp_core::vc::PresentationRejection;
use gnap4vp_provider::*;

const BOTH: [FlowId; 2] = [FlowId::WalletInteraction, FlowId::LvpAuthorization];

fn attacker() -> KeyPair {
    KeyPair::generate("did:web:mallory.example#key-1", &RandomSource::seeded(99, "attacker"))
}

#[test]
fn consumer_preference_order_wins() {
    let w = World::new(&BOTH);
    let mut req = w.wallet_request();
    req.flow_preferences = vec![FlowId::WalletInteraction, FlowId::LvpAuthorization];
    req.client.metadata = Some(w.metadata(w.now(), w.now() + 120));
    assert_eq!(w.provider.handle_grant(&req).unwrap().selected_flow, FlowId::WalletInteraction);

    let lvp_only = World::new(&[FlowId::LvpAuthorization]);
    let mut req = lvp_only.wallet_request();
    req.flow_preferences = vec![FlowId::WalletInteraction, FlowId::LvpAuthorization];
    req.client.metadata = Some(lvp_only.metadata(lvp_only.now(), lvp_only.now() + 120));
    let resp = lvp_only.provider.handle_grant(&req).unwrap();
    assert_eq!(resp.selected_flow, FlowId::LvpAuthorization);
    assert!(resp.access_token.is_some() && resp.interact_info.is_none());
}

#[test]
fn no_overlap_is_flow_not_supported() {
    let w = World::new(&[FlowId::WalletInteraction]);
    let req = w.lvp_request(w.metadata(w.now(), w.now() + 120));
    assert_eq!(w.provider.handle_grant(&req), Err(ProviderError::FlowNotSupported));
    let none = World::new(&[]);
    assert_eq!(none.provider.handle_grant(&none.wallet_request()), Err(ProviderError::FlowNotSupported));
}

#[test]
fn invalid_requests_and_unknown_rights_are_rejected() {
    let w = World::new(&BOTH);
    let mut req = w.wallet_request();
    req.flow_preferences.clear();
    assert!(
        matches!(w.provider.handle_grant(&req), Err(ProviderError::InvalidRequest(v)) if v.iter().any(|s| s == "flow_preferences non-empty"))
    );
    let mut req = w.wallet_request();
    req.access = vec![AccessRight::new("root", &["write"])];
    assert!(matches!(w.provider.handle_grant(&req), Err(ProviderError::InvalidRequest(_))));
}

#[test]
fn honest_lvp_issues_a_key_bound_token() {
    let w = World::new(&BOTH);
    let resp = w.provider.handle_grant(&w.lvp_request(w.metadata(w.now() - 10, w.now() + 110))).unwrap();
    let token = resp.access_token.unwrap();
    assert_eq!(token.bound_key, w.consumer_key.public_key());
    assert_eq!(token.expires_at, w.now() + 3600);
    assert_eq!(resp.subject_info.unwrap()["member_id"].credential_id, "urn:vc:member");
    assert!(w.provider.audit_issuance().is_ok());
    let grants = w.provider.grants();
    assert_eq!(grants.len(), 1);
    assert_eq!(grants[0].status, GrantStatus::Issued);
    assert!(grants[0].invariant_holds());
}

#[test]
fn lvp_replay_is_exact_duplicate_detection() {
    let w = World::new(&BOTH);
    let req = w.lvp_request(w.metadata(w.now(), w.now() + 120));
    assert!(w.provider.handle_grant(&req).is_ok());
    assert_eq!(w.provider.handle_grant(&req), Err(ProviderError::Lvp(LvpRejection::Replay)));
    // Fresh timestamps make a distinct request.
    assert!(w.provider.handle_grant(&w.lvp_request(w.metadata(w.now() - 1, w.now() + 119))).is_ok());
}

#[test]
fn lvp_window_edges_are_inclusive() {
    let w = World::new(&BOTH);
    let (from, until) = (T0 + 10, T0 + 70);
    let at = |t: i64, m: SignedClientMetadata| {
        w.clock.set(t);
        w.provider.handle_grant(&w.lvp_request(m)).map(|_| ())
    };
    let window = Err(ProviderError::Lvp(LvpRejection::WindowViolation));
    assert_eq!(at(from - 1, w.metadata(from, until)), window);
    assert_eq!(at(until + 1, w.metadata(from, until)), window);
    assert_eq!(at(from, w.metadata(from, until)), Ok(()));
    assert_eq!(at(until, w.metadata(from - 1, until)), Ok(()));
}

#[test]
fn lvp_rejections() {
    let w = World::new(&BOTH);
    let mut wrong_aud = w.metadata(w.now(), w.now() + 60);
    wrong_aud.metadata.audience = "https://other.example".into();
    let wrong_aud = wrong_aud.metadata.sign(&w.consumer_key).unwrap();
    let lvp = |m| w.provider.handle_grant(&w.lvp_request(m));
    assert_eq!(lvp(wrong_aud), Err(ProviderError::Lvp(LvpRejection::AudienceMismatch)));

    let mut tampered = w.metadata(w.now(), w.now() + 60);
    tampered.metadata.valid_until -= 1;
    assert_eq!(lvp(tampered), Err(ProviderError::Lvp(LvpRejection::BadSignature)));

    let mut forged = w.metadata(w.now(), w.now() + 61);
    forged.envelope = crypto::sign(&forged.signed_bytes(), crypto::context::CLIENT_METADATA, &attacker()).unwrap();
    assert_eq!(lvp(forged), Err(ProviderError::Lvp(LvpRejection::BadSignature)));
}

#[test]
fn lvp_without_service_or_reachable_host() {
    let w = World::new(&BOTH);
    let lvp = |m| w.provider.handle_grant(&w.lvp_request(m));
    let doc = DidDocument::new(CONSUMER).with_key(w.consumer_key.public_key()).to_json();
    w.net.mount("consumer.example", Arc::new(move |_: &HttpRequest| HttpResponse::new(200, doc.clone())));
    assert_eq!(lvp(w.metadata(w.now(), w.now() + 62)), Err(ProviderError::Lvp(LvpRejection::NoLvpService)));

    let w = World::new(&BOTH);
    w.net.unmount("consumer.example");
    assert_eq!(
        w.provider.handle_grant(&w.lvp_request(w.metadata(w.now(), w.now() + 60))),
        Err(ProviderError::Lvp(LvpRejection::FetchFailed))
    );
}

#[test]
fn lvp_untrusted_issuer() {
    let w = World::with_registry(&BOTH, false);
    assert_eq!(
        w.provider.handle_grant(&w.lvp_request(w.metadata(w.now(), w.now() + 60))),
        Err(ProviderError::Lvp(LvpRejection::Presentation(PresentationRejection::UntrustedIssuer)))
    );
}

#[test]
fn concurrent_duplicate_lvp_requests_admit_one() {
    let w = World::new(&BOTH);
    let req = Arc::new(w.lvp_request(w.metadata(w.now(), w.now() + 120)));
    let handles: Vec<_> = (0..100)
        .map(|_| {
            let (p, r) = (w.provider.clone(), req.clone());
            std::thread::spawn(move || p.handle_grant(&r))
        })
        .collect();
    let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    assert_eq!(results.iter().filter(|r| r.is_ok()).count(), 1);
    assert!(results.iter().filter(|r| r.is_err()).all(|r| *r == Err(ProviderError::Lvp(LvpRejection::Replay))));
}

#[test]
fn exchange_definition_lookup() {
    let w = World::new(&BOTH);
    let resp = w.provider.handle_grant(&w.wallet_request()).unwrap();
    let ex = World::exchange_id(&resp);
    let object = w.provider.get_presentation_definition(&ex).unwrap();
    assert_eq!(object.audience, AS);
    assert_eq!(object.server_nonce, resp.interact_info.as_ref().unwrap().server_nonce);
    assert_eq!(object.definition.input_descriptors[0].descriptor_id, "member");
    assert_eq!(w.provider.get_presentation_definition(&ex).unwrap(), object);
    assert_eq!(w.provider.get_presentation_definition("nope"), Err(ProviderError::UnknownExchange));

    w.clock.advance(601);
    assert_eq!(w.provider.get_presentation_definition(&ex), Err(ProviderError::ExchangeExpired));
    assert_eq!(w.provider.grant(&World::grant_id(&resp)).unwrap().status, GrantStatus::Expired);
}

#[test]
fn honest_vp_is_authorized_with_a_verifiable_hash() {
    let w = World::new(&BOTH);
    let (resp, result) = w.authorized_wallet_grant();
    assert_eq!(result.result, InteractionResult::Authorized);
    assert_eq!(result.callback_uri, "https://consumer.example/callback?session=s1");
    let hash = result.interaction_hash.unwrap();
    assert_eq!(hash.len(), HASH_B64_LEN);
    let expected = crypto::interaction_hash(
        "client-nonce-0123456789abcdef",
        &resp.interact_info.as_ref().unwrap().server_nonce,
        result.interaction_ref.as_deref().unwrap(),
        "https://provider.example/gnap/grant",
    )
    .unwrap();
    assert_eq!(hash, expected);
    let ex = w.provider.exchange(&World::exchange_id(&resp)).unwrap();
    assert_eq!(ex.status, ExchangeStatus::Authorized);
    assert_eq!(ex.interaction_ref, result.interaction_ref);
    let again = VpSubmission::Presentation { vp_token: w.honest_vp(&ex.server_nonce) };
    assert_eq!(w.provider.submit_vp(&ex.exchange_id, &again), Err(ProviderError::AlreadyTerminal));
}

#[test]
fn wrong_nonce_and_refusal_are_denied_with_callback() {
    let w = World::new(&BOTH);
    let resp = w.provider.handle_grant(&w.wallet_request()).unwrap();
    let ex = World::exchange_id(&resp);
    let r = w.provider.submit_vp(&ex, &VpSubmission::Presentation { vp_token: w.honest_vp("stale") }).unwrap();
    assert_eq!(r.result, InteractionResult::Denied);
    assert_eq!(r.reason.as_deref(), Some("NonceMismatch"));
    assert_eq!(r.callback_uri, "https://consumer.example/callback?session=s1");
    assert!(r.interaction_ref.is_none());
    assert_eq!(w.provider.grant(&World::grant_id(&resp)).unwrap().status, GrantStatus::Denied);

    let resp = w.provider.handle_grant(&w.wallet_request()).unwrap();
    let r = w
        .provider
        .submit_vp(&World::exchange_id(&resp), &VpSubmission::Refusal { error: "UserDenied".into() })
        .unwrap();
    assert_eq!((r.result, r.reason.as_deref()), (InteractionResult::Denied, Some("UserDenied")));
}

#[test]
fn continuation_rules() {
    let w = World::new(&BOTH);
    let (resp, result) = w.authorized_wallet_grant();
    let iref = result.interaction_ref.unwrap();

    let no_proof = w.send(w.continue_request(&resp, &iref, None));
    assert_eq!((no_proof.status, no_proof.error_body().label().to_string()), (401, "BadSignature".into()));
    let stolen = w.send(w.continue_request(&resp, &iref, Some(&attacker())));
    assert_eq!(stolen.error_body().label(), "BadSignature");

    let ok = w.send(w.continue_request(&resp, &iref, Some(&w.consumer_key)));
    assert_eq!(ok.status, 200, "{}", String::from_utf8_lossy(&ok.body));
    let granted: GrantResponse = ok.parse().unwrap();
    assert_eq!(granted.access_token.as_ref().unwrap().bound_key, w.consumer_key.public_key());
    assert_eq!(granted.subject_info.as_ref().unwrap()["member_id"].value, "M-1");
    assert_eq!(w.provider.grant(&World::grant_id(&resp)).unwrap().status, GrantStatus::Issued);

    let reused = w.send(w.continue_request(&resp, &iref, Some(&w.consumer_key)));
    assert_eq!(reused.error_body().error, "BadContinuationToken");
    assert!(w.provider.audit_issuance().is_ok());
}

#[test]
fn wrong_interaction_ref_denies_the_grant() {
    let w = World::new(&BOTH);
    let (resp, _) = w.authorized_wallet_grant();
    let bad = w.send(w.continue_request(&resp, "forged-ref", Some(&w.consumer_key)));
    assert_eq!((bad.status, bad.error_body().error), (400, "BadInteractionRef".to_string()));
    let g = w.provider.grant(&World::grant_id(&resp)).unwrap();
    assert_eq!(g.status, GrantStatus::Denied);
    assert!(g.issued_token_id.is_none());
    assert!(w.provider.tokens().is_empty());
}

#[test]
fn continue_before_interaction_is_wrong_state() {
    let w = World::new(&BOTH);
    let resp = w.provider.handle_grant(&w.wallet_request()).unwrap();
    let early = w.send(w.continue_request(&resp, "x", Some(&w.consumer_key)));
    assert_eq!(early.error_body().error, "WrongState");
}

fn lvp_token(w: &World) -> String {
    let resp = w.provider.handle_grant(&w.lvp_request(w.metadata(w.now(), w.now() + 60))).unwrap();
    resp.access_token.unwrap().value
}

#[test]
fn resource_requires_proof_from_the_bound_key() {
    let w = World::new(&BOTH);
    let token = lvp_token(&w);
    let ok = w.send(w.resource_request(&token, Some(&w.consumer_key)));
    assert_eq!(ok.status, 200);
    assert_eq!(ok.parse::<serde_json::Value>().unwrap()["dataset"], "demo");

    for (req, label) in [
        (w.resource_request(&token, None), "BadSignature"),
        (w.resource_request(&token, Some(&attacker())), "BadSignature"),
        (w.resource_request("unknown-token", Some(&w.consumer_key)), "UnknownToken"),
    ] {
        let r = w.send(req);
        assert_eq!((r.status, r.error_body().label()), (401, label));
    }

    // Proof for another request.
    let mut wrong = w.resource_request(&token, Some(&w.consumer_key));
    wrong.method = "POST".into();
    assert_eq!(w.send(wrong).error_body().label(), "DigestMismatch");

    let old = w.resource_request(&token, Some(&w.consumer_key));
    w.clock.advance(121);
    assert_eq!(w.send(old).error_body().label(), "StaleProof");
    w.clock.advance(3600);
    assert_eq!(w.send(w.resource_request(&token, Some(&w.consumer_key))).error_body().label(), "ExpiredToken");
}

#[test]
fn proof_rejection_order_matches_core() {
    let w = World::new(&BOTH);
    let token = lvp_token(&w);
    let r = w.provider.serve_resource(&gnap4vp_provider::service::ResourceCall {
        path: "/api/data",
        token: Some(&token),
        proof: None,
        method: "GET",
        uri: "https://provider.example/api/data",
        body: b"",
    });
    assert_eq!(r, Err(ProviderError::Unauthorized(ResourceRejection::Proof(ProofRejection::BadSignature))));
}

#[test]
fn snapshot_restores_tokens_and_replay_guard() {
    let w = World::new(&BOTH);
    let meta = w.metadata(w.now(), w.now() + 60);
    let resp = w.provider.handle_grant(&w.lvp_request(meta.clone())).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("provider-state.json");
    w.provider.save_snapshot(&path).unwrap();

    let fresh = World::new(&BOTH);
    fresh.clock.set(w.now());
    fresh.provider.load_snapshot(&path).unwrap();
    assert_eq!(fresh.provider.snapshot(), w.provider.snapshot());
    let token = resp.access_token.unwrap().value;
    assert_eq!(fresh.send(w.resource_request(&token, Some(&w.consumer_key))).status, 200);
    assert_eq!(fresh.provider.handle_grant(&w.lvp_request(meta)), Err(ProviderError::Lvp(LvpRejection::Replay)));
}

#[test]
fn http_routes() {
    let w = World::new(&BOTH);
    let r = w.send(HttpRequest::post_json(format!("{AS}/gnap/grant"), &w.wallet_request()));
    assert_eq!(r.status, 200);
    let resp: GrantResponse = r.parse().unwrap();
    let uri = resp.interact_info.as_ref().unwrap().vp_exchange_uri.clone();
    let object: ExchangeRequestObject = w.send(HttpRequest::get(uri.clone())).parse().unwrap();
    let sub = VpSubmission::Presentation { vp_token: w.honest_vp(&object.server_nonce) };
    let result: VpSubmissionResult = w.send(HttpRequest::post_json(uri.clone(), &sub)).parse().unwrap();
    assert_eq!(result.result, InteractionResult::Authorized);
    assert_eq!(w.send(HttpRequest::post_json(uri, &sub)).status, 409);
    assert_eq!(w.send(HttpRequest::get(format!("{AS}/vp/exchange/zzz"))).status, 404);
    assert_eq!(w.send(HttpRequest::get(format!("{AS}/elsewhere"))).status, 404);
    let garbage = HttpRequest::new("POST", format!("{AS}/gnap/grant")).body(b"{".to_vec());
    assert_eq!(w.send(garbage).error_body().error, "InvalidRequest");
}
