//! The scenario set. Each script drives roles through their public HTTP
//! surfaces and returns observed outcomes; nothing here reaches into role
//! state except the consumer's continuation counter.

use std::collections::BTreeMap;
use std::sync::{Arc, Barrier};

use gnap4vp_consumer::DeliveryMode;
use gnap4vp_core::crypto::{make_possession_proof, KeyPair};
use gnap4vp_core::model::{AccessRight, ClientIdentity, ClientMetadata, FlowId, GrantRequest, GrantResponse};
use gnap4vp_core::transport::{Client, HttpRequest, HttpResponse};
use serde_json::Value;

use crate::fixtures::*;
use crate::scenario::{
    consumer_outcome, outcomes, provider_outcome, wallet_outcome, Defense, Mutation, RoleOutcomes, Scenario, Transform,
};
use crate::topology::{ConsumerKey, Deployment, Topology};

pub const THEFT_ATTEMPTS: usize = 100;
pub const CONCURRENT_DUPLICATES: usize = 100;

const WALLET: FlowId = FlowId::WalletInteraction;
const LVP: FlowId = FlowId::LvpAuthorization;

fn base(
    name: &'static str,
    tags: &'static [&'static str],
    flows: &'static [FlowId],
    script: crate::scenario::Script,
) -> Scenario {
    Scenario {
        name,
        tags,
        flows,
        topology: Topology::default(),
        fixed_capabilities: false,
        mutation: None,
        defense: None,
        parallel: false,
        setup: None,
        expected: RoleOutcomes::new("", "", ""),
        script,
    }
}

fn manual() -> Topology {
    Topology { consumer_mode: DeliveryMode::Manual, ..Topology::default() }
}

fn err(e: impl std::fmt::Debug) -> String {
    format!("{e:?}")
}

fn label(resp: &HttpResponse) -> String {
    if resp.is_success() {
        "issued".into()
    } else {
        resp.error_body().label().to_string()
    }
}

fn tally(labels: impl IntoIterator<Item = String>) -> String {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let accepted = counts.remove("issued").unwrap_or(0);
    let mut parts = vec![format!("accepted={accepted}")];
    parts.extend(counts.iter().map(|(l, n)| format!("{l}={n}")));
    parts.join("; ")
}

fn json_body(req: &HttpRequest) -> Option<Value> {
    serde_json::from_slice(&req.body).ok()
}

/// Starts a session and, when it got parked at the wallet, drives the
/// manual wallet path. Returns the session id.
fn start(d: &Deployment, prefs: &[FlowId]) -> Result<String, String> {
    let started = d.machine_start(prefs).map_err(err)?;
    if let Some(qr) = Deployment::qr_payload(&started) {
        let ex = d.human_ingest(qr).map_err(err)?;
        let pending = d.human_pending().map_err(err)?;
        if !pending.iter().any(|p| p.local_id == ex.local_id) {
            return Err(format!("exchange {} not queued for approval", ex.local_id));
        }
        d.human_approve(&ex.local_id, d.membership_selection()).map_err(err)?;
    }
    Ok(started.session.session_id)
}

fn fetch_checked(d: &Deployment, session_id: &str) -> Result<(), String> {
    let payload = d.machine_fetch(session_id).map_err(err)?;
    if payload != resource_payload() {
        return Err(format!("unexpected resource payload {payload}"));
    }
    Ok(())
}

fn happy(d: &Deployment, prefs: &[FlowId]) -> Result<RoleOutcomes, String> {
    let sid = start(d, prefs)?;
    fetch_checked(d, &sid)?;
    Ok(outcomes(d))
}

fn wallet_happy(d: &Deployment) -> Result<RoleOutcomes, String> {
    happy(d, &[WALLET])
}

fn lvp_happy(d: &Deployment) -> Result<RoleOutcomes, String> {
    happy(d, &[LVP])
}

/// Metadata whose window ends exactly now, then one that starts exactly now.
fn lvp_window_edges(d: &Deployment) -> Result<RoleOutcomes, String> {
    let first = start(d, &[LVP])?;
    d.consumer_clock.set_offset(0);
    fetch_checked(d, &first)?;
    happy(d, &[LVP])
}

fn negotiate(d: &Deployment) -> Result<RoleOutcomes, String> {
    let prefs = [WALLET, LVP];
    let mut o = match start(d, &prefs) {
        Ok(sid) => {
            fetch_checked(d, &sid)?;
            outcomes(d)
        }
        Err(_) => outcomes(d),
    };
    if let Some(flow) = d.consumer.sessions().first().and_then(|s| s.selected_flow) {
        o.consumer = format!("selected={}; {}", flow.as_str(), o.consumer);
    }
    Ok(o)
}

/// An LVP session whose failure, wherever it happens, shows in role state.
fn attempt_lvp(d: &Deployment) -> Result<RoleOutcomes, String> {
    if let Ok(sid) = start(d, &[LVP]) {
        let _ = d.machine_fetch(&sid);
    }
    Ok(outcomes(d))
}

fn lvp_replay(d: &Deployment) -> Result<RoleOutcomes, String> {
    let sid = start(d, &[LVP])?;
    let captured = d.sent("consumer", "POST", "/gnap/grant").pop().ok_or("no grant request on the wire")?;
    let replayed = d.attacker.send(captured.request).map_err(err)?;
    fetch_checked(d, &sid)?;
    let mut o = outcomes(d);
    o.provider = format!("{}; replay={}", o.provider, label(&replayed));
    Ok(o)
}

/// The same signed request, sent many times at once.
fn lvp_replay_concurrent(d: &Deployment) -> Result<RoleOutcomes, String> {
    let now = d.now();
    let metadata = ClientMetadata {
        valid_from: now,
        valid_until: now + 120,
        audience: PROVIDER_ORIGIN.into(),
        did: CONSUMER_DID.into(),
        key_id: d.ids.consumer_key.key_id().into(),
    }
    .sign(&d.ids.consumer_key)
    .map_err(err)?;
    let request = GrantRequest {
        access: vec![AccessRight::new(RIGHT, &["read"])],
        client: ClientIdentity { did: CONSUMER_DID.into(), key: None, metadata: Some(metadata), display_name: None },
        interact: None,
        flow_preferences: vec![LVP],
    };
    let req = HttpRequest::post_json(format!("{PROVIDER_ORIGIN}/gnap/grant"), &request);
    let barrier = Arc::new(Barrier::new(CONCURRENT_DUPLICATES));
    let labels: Vec<String> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..CONCURRENT_DUPLICATES)
            .map(|_| {
                let (barrier, req, client) = (barrier.clone(), req.clone(), d.attacker.clone());
                scope.spawn(move || {
                    barrier.wait();
                    client.send(req).map(|r| label(&r)).unwrap_or_else(|e| format!("transport:{e}"))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sender thread")).collect()
    });
    Ok(RoleOutcomes::new(consumer_outcome(d), format!("{}; {}", provider_outcome(d), tally(labels)), wallet_outcome(d)))
}

fn resource_call(client: &Client, token: &str, proof_key: Option<&KeyPair>, now: i64) -> Result<String, String> {
    let url = format!("{PROVIDER_ORIGIN}{RESOURCE_PATH}");
    let mut req = HttpRequest::get(&url).header("authorization", format!("GNAP {token}"));
    if let Some(key) = proof_key {
        let proof = make_possession_proof("GET", &url, b"", key, now).map_err(err)?;
        req = req.header("gnap-proof", proof.to_header());
    }
    let resp = client.send(req).map_err(err)?;
    Ok(if resp.is_success() { "served".into() } else { resp.error_body().label().to_string() })
}

/// A token read off the wire is useless without the consumer's key.
fn token_theft(d: &Deployment) -> Result<RoleOutcomes, String> {
    let sid = start(d, &[LVP])?;
    let grant: GrantResponse = d.observed_grant_response().ok_or("no grant response on the wire")?;
    let token = grant.access_token.ok_or("grant response without token")?.value;
    let now = d.now();

    let mut stolen: BTreeMap<String, usize> = BTreeMap::new();
    for i in 0..THEFT_ATTEMPTS {
        let forged = d
            .attacker_rng
            .next_u64()
            .is_multiple_of(2)
            .then(|| KeyPair::generate(format!("attacker-{i}"), &d.attacker_rng));
        *stolen.entry(resource_call(&d.attacker, &token, forged.as_ref(), now)?).or_default() += 1;
    }
    let holder = Client::new("holder", d.traffic.clone());
    let mut honest = 0;
    for _ in 0..THEFT_ATTEMPTS {
        if resource_call(&holder, &token, Some(&d.ids.consumer_key), now)? == "served" {
            honest += 1;
        }
    }
    fetch_checked(d, &sid)?;
    let stolen = stolen.iter().map(|(l, n)| format!("{n}/{THEFT_ATTEMPTS} {l}")).collect::<Vec<_>>().join(", ");
    let mut o = outcomes(d);
    o.provider = format!("{}; stolen={stolen}; honest={honest}/{THEFT_ATTEMPTS}", o.provider);
    Ok(o)
}

fn substitute_callback_ref(d: &Deployment) {
    d.traffic.intercept(Arc::new(|origin: &str, req: &mut HttpRequest| {
        if origin != "wallet" || req.method != "POST" || !req.path().starts_with("/callback") {
            return;
        }
        if let Some(mut v) = json_body(req) {
            if v.get("interaction_ref").is_some() {
                v["interaction_ref"] = Value::String("substituted-ref".into());
                req.body = serde_json::to_vec(&v).expect("json");
            }
        }
    }));
}

/// Wallet flow where the fetch outcome is part of the observation.
fn wallet_then_fetch(d: &Deployment) -> Result<RoleOutcomes, String> {
    let sid = start(d, &[WALLET])?;
    let _ = d.machine_fetch(&sid);
    Ok(outcomes(d))
}

fn with_continuations(d: &Deployment) -> Result<RoleOutcomes, String> {
    let mut o = wallet_then_fetch(d)?;
    o.consumer = format!("{}; continuations={}", o.consumer, d.consumer.continuations_sent());
    Ok(o)
}

fn callback_ref_substitution(d: &Deployment) -> Result<RoleOutcomes, String> {
    substitute_callback_ref(d);
    with_continuations(d)
}

fn continue_ref_substitution(d: &Deployment) -> Result<RoleOutcomes, String> {
    substitute_callback_ref(d);
    with_continuations(d)
}

fn continue_stripped_proof(d: &Deployment) -> Result<RoleOutcomes, String> {
    d.traffic.intercept(Arc::new(|origin: &str, req: &mut HttpRequest| {
        if origin == "consumer" && req.method == "POST" && req.path().starts_with("/gnap/continue") {
            req.headers.retain(|(name, _)| name != "gnap-proof");
        }
    }));
    wallet_then_fetch(d)
}

fn lvp_tampered_metadata(d: &Deployment) -> Result<RoleOutcomes, String> {
    d.traffic.intercept(Arc::new(|origin: &str, req: &mut HttpRequest| {
        if origin != "consumer" || req.method != "POST" || !req.path().starts_with("/gnap/grant") {
            return;
        }
        let Some(mut v) = json_body(req) else { return };
        let Some(until) = v.pointer("/client/metadata/valid_until").and_then(Value::as_i64) else { return };
        v["client"]["metadata"]["valid_until"] = Value::from(until ^ 1);
        req.body = serde_json::to_vec(&v).expect("json");
    }));
    attempt_lvp(d)
}

/// A VP captured from one session, presented to another.
fn vp_replay(d: &Deployment) -> Result<RoleOutcomes, String> {
    start(d, &[WALLET])?;
    let captured = d.sent("wallet", "POST", "/vp/exchange/").pop().ok_or("no VP submission on the wire")?;
    let second = d.machine_start(&[WALLET]).map_err(err)?;
    let target = Deployment::qr_payload(&second).ok_or("second session has no QR payload")?;
    let mut replay = captured.request;
    replay.url = target.to_string();
    let resp = d.attacker.send(replay).map_err(err)?;
    let verdict = match resp.parse::<Value>().ok() {
        Some(v) if resp.is_success() => {
            format!("{}:{}", v["result"].as_str().unwrap_or("?"), v["reason"].as_str().unwrap_or("none"))
        }
        _ => resp.error_body().label().to_string(),
    };
    let mut o = outcomes(d);
    o.provider = format!("{}; replayed_vp={verdict}", o.provider);
    Ok(o)
}

fn disable_callback_hash(d: &Deployment) {
    Defense::CallbackHash.disable(d);
}

pub fn scenarios() -> Vec<Scenario> {
    vec![
        Scenario {
            expected: RoleOutcomes::new("done", "issued", "relayed"),
            ..base("wallet_happy_automated", &["happy", "wallet"], &[WALLET], wallet_happy)
        },
        Scenario {
            topology: manual(),
            expected: RoleOutcomes::new("done", "issued", "relayed"),
            ..base("wallet_happy_manual", &["happy", "wallet"], &[WALLET], wallet_happy)
        },
        Scenario {
            expected: RoleOutcomes::new("done", "issued", "untouched"),
            ..base("lvp_happy", &["happy", "lvp"], &[LVP], lvp_happy)
        },
        Scenario {
            topology: Topology { consumer_clock_offset: -120, ..Topology::default() },
            expected: RoleOutcomes::new("done,done", "issued,issued", "untouched"),
            ..base("lvp_window_edges", &["happy", "lvp", "window"], &[LVP], lvp_window_edges)
        },
        Scenario {
            fixed_capabilities: true,
            expected: RoleOutcomes::new("selected=wallet_interaction; done", "issued", "relayed"),
            ..base("negotiation_both", &["negotiation"], &[WALLET, LVP], negotiate)
        },
        Scenario {
            topology: Topology { provider_flows: vec![LVP], ..Topology::default() },
            fixed_capabilities: true,
            expected: RoleOutcomes::new("selected=lvp_authorization; done", "issued", "untouched"),
            ..base("negotiation_lvp_only", &["negotiation"], &[WALLET, LVP], negotiate)
        },
        Scenario {
            topology: Topology { provider_flows: vec![], ..Topology::default() },
            fixed_capabilities: true,
            expected: RoleOutcomes::flow_not_supported(),
            ..base("negotiation_none", &["negotiation"], &[WALLET, LVP], negotiate)
        },
        Scenario {
            mutation: Some(Mutation::new("lvp grant request", Transform::ReplayMessage)),
            defense: Some(Defense::ReplayGuard),
            expected: RoleOutcomes::new("done", "issued; replay=Replay", "untouched"),
            ..base("lvp_replay", &["adversarial", "lvp", "replay"], &[LVP], lvp_replay)
        },
        Scenario {
            mutation: Some(Mutation::new("lvp grant request", Transform::ReplayMessage)),
            defense: Some(Defense::ReplayGuard),
            parallel: true,
            expected: RoleOutcomes::new("none", "issued; accepted=1; Replay=99", "untouched"),
            ..base("lvp_replay_concurrent", &["adversarial", "lvp", "replay"], &[LVP], lvp_replay_concurrent)
        },
        Scenario {
            topology: Topology { consumer_clock_offset: 1, ..Topology::default() },
            mutation: Some(Mutation::new("client metadata valid_from", Transform::ShiftValidityWindow)),
            defense: Some(Defense::MetadataWindow),
            expected: RoleOutcomes::new("failed:WindowViolation", "none", "untouched"),
            ..base("lvp_window_early", &["adversarial", "lvp", "window"], &[LVP], attempt_lvp)
        },
        Scenario {
            topology: Topology { consumer_clock_offset: -121, ..Topology::default() },
            mutation: Some(Mutation::new("client metadata valid_until", Transform::ShiftValidityWindow)),
            defense: Some(Defense::MetadataWindow),
            expected: RoleOutcomes::new("failed:WindowViolation", "none", "untouched"),
            ..base("lvp_window_late", &["adversarial", "lvp", "window"], &[LVP], attempt_lvp)
        },
        Scenario {
            mutation: Some(Mutation::new("client metadata valid_until", Transform::FlipPayloadByte)),
            defense: Some(Defense::MetadataSignature),
            expected: RoleOutcomes::new("failed:BadSignature", "none", "untouched"),
            ..base("lvp_tampered_metadata", &["adversarial", "lvp"], &[LVP], lvp_tampered_metadata)
        },
        Scenario {
            topology: Topology { consumer_key: ConsumerKey::Swapped, ..Topology::default() },
            mutation: Some(Mutation::new("client metadata signing key", Transform::SwapSigningKey)),
            defense: Some(Defense::MetadataSignature),
            expected: RoleOutcomes::new("failed:BadSignature", "none", "untouched"),
            ..base("lvp_forged_key", &["adversarial", "lvp"], &[LVP], attempt_lvp)
        },
        Scenario {
            mutation: Some(Mutation::new("resource request proof", Transform::StripPossessionProof)),
            defense: Some(Defense::PossessionProof),
            expected: RoleOutcomes::new(
                "done",
                format!("issued; stolen={THEFT_ATTEMPTS}/{THEFT_ATTEMPTS} BadSignature; honest={THEFT_ATTEMPTS}/{THEFT_ATTEMPTS}"),
                "untouched",
            ),
            ..base("token_theft", &["adversarial", "lvp", "token"], &[LVP], token_theft)
        },
        Scenario {
            mutation: Some(Mutation::new("callback interaction_ref", Transform::SubstituteInteractionRef)),
            defense: Some(Defense::CallbackHash),
            expected: RoleOutcomes::new("failed:HashMismatch; continuations=0", "interaction_complete", "relayed"),
            ..base("callback_ref_substitution", &["adversarial", "wallet", "hash"], &[WALLET], callback_ref_substitution)
        },
        Scenario {
            mutation: Some(Mutation::new("callback interaction_ref", Transform::SubstituteInteractionRef)),
            defense: Some(Defense::InteractionRef),
            setup: Some(disable_callback_hash),
            expected: RoleOutcomes::new("failed:BadInteractionRef; continuations=1", "denied", "relayed"),
            ..base("continue_ref_substitution", &["adversarial", "wallet"], &[WALLET], continue_ref_substitution)
        },
        Scenario {
            mutation: Some(Mutation::new("continue request proof", Transform::StripPossessionProof)),
            defense: Some(Defense::ContinuationProof),
            expected: RoleOutcomes::new("failed:BadSignature", "interaction_complete", "relayed"),
            ..base("continue_stripped_proof", &["adversarial", "wallet"], &[WALLET], continue_stripped_proof)
        },
        Scenario {
            topology: Topology { trust_issuer: false, ..Topology::default() },
            mutation: Some(Mutation::new("trusted issuer registry", Transform::RemoveIssuerFromRegistry)),
            defense: Some(Defense::IssuerRegistry),
            expected: RoleOutcomes::new("failed:Denied", "denied", "relayed(denied:UntrustedIssuer)"),
            ..base("untrusted_issuer_wallet", &["adversarial", "wallet", "issuer"], &[WALLET], wallet_then_fetch)
        },
        Scenario {
            topology: Topology { trust_issuer: false, ..Topology::default() },
            mutation: Some(Mutation::new("trusted issuer registry", Transform::RemoveIssuerFromRegistry)),
            defense: Some(Defense::IssuerRegistry),
            expected: RoleOutcomes::new("failed:UntrustedIssuer", "none", "untouched"),
            ..base("untrusted_issuer_lvp", &["adversarial", "lvp", "issuer"], &[LVP], attempt_lvp)
        },
        Scenario {
            topology: manual(),
            mutation: Some(Mutation::new("vp submission", Transform::ReplayMessage)),
            defense: Some(Defense::PresentationNonce),
            expected: RoleOutcomes::new(
                "awaiting_wallet,continuing",
                "denied,interaction_complete; replayed_vp=denied:NonceMismatch",
                "relayed",
            ),
            ..base("vp_replay", &["adversarial", "wallet", "replay"], &[WALLET], vp_replay)
        },
    ]
}

pub fn find(name: &str) -> Option<Scenario> {
    scenarios().into_iter().find(|s| s.name == name)
}
