//! One line per acceptance criterion; exits non-zero if any fails.

#[path = "../../core/tests/oracles/matcher.rs"]
mod matcher;

use std::sync::Arc;
use std::time::{Duration, Instant};

use gnap4vp_consumer::DeliveryMode;
use gnap4vp_core::crypto::interaction_hash;
use gnap4vp_core::did::did_web_to_url;
use gnap4vp_core::model::FlowId;
use gnap4vp_core::random::RandomSource;
use gnap4vp_core::transport::HttpRequest;
use gnap4vp_core::vc::{match_definition, Credential};
use gnap4vp_harness::catalog::{CONCURRENT_DUPLICATES, THEFT_ATTEMPTS};
use gnap4vp_harness::{run_suite, ConformanceReport, Deployment, RunOptions, ScenarioReport, Topology, TransportKind};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use serde::Deserialize;

const SUITE_LIMIT: Duration = Duration::from_secs(10);
/// Distance outside the metadata window at which requests must be refused.
const WINDOW_MARGIN_SECS: i64 = 1;
const HASH_CASES: u32 = 256;
const HASH_CASES_REQUIRED: u32 = 200;
const MATCHER_MAX_DESCRIPTORS: usize = 5;
const MATCHER_MAX_CREDENTIALS: usize = 8;
const DID_WEB_ROWS: usize = 20;
const HASH_ROWS: usize = 10;

const B64URL: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";

type Verdict = Result<String, String>;

fn scenario<'a>(report: &'a ConformanceReport, name: &str) -> Result<&'a ScenarioReport, String> {
    report.scenario(name).ok_or_else(|| format!("scenario {name} missing from the report"))
}

fn passed(s: &ScenarioReport) -> Result<(), String> {
    if s.passed() {
        Ok(())
    } else {
        Err(format!(
            "{}: expected {:?}, observed {:?}, violations {:?}, error {:?}",
            s.name, s.expected, s.observed, s.violations, s.error
        ))
    }
}

fn has_steps(s: &ScenarioReport, flow: FlowId, steps: std::ops::RangeInclusive<u8>) -> Result<(), String> {
    let seen = s.steps.get(&flow).cloned().unwrap_or_default();
    let missing: Vec<u8> = steps.filter(|n| !seen.contains(n)).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(format!("{}: steps {missing:?} absent from the transcript", s.name))
    }
}

fn wallet_e2e(report: &ConformanceReport, elapsed: Duration) -> Verdict {
    let s = scenario(report, "wallet_happy_automated")?;
    passed(s)?;
    has_steps(s, FlowId::WalletInteraction, 1..=15)?;
    if elapsed >= SUITE_LIMIT {
        return Err(format!("suite took {elapsed:?}, limit {SUITE_LIMIT:?}"));
    }
    Ok(format!("resource fetched, steps 1-15 logged, suite {} ms", elapsed.as_millis()))
}

fn lvp_e2e(report: &ConformanceReport) -> Verdict {
    let s = scenario(report, "lvp_happy")?;
    passed(s)?;
    has_steps(s, FlowId::LvpAuthorization, 3..=10)?;
    if s.steps.contains_key(&FlowId::WalletInteraction) || s.transcript.iter().any(|e| e.actor == "wallet") {
        return Err("wallet participated in an LVP run".into());
    }
    let observed = s.observed.as_ref().expect("passed scenarios have outcomes");
    if observed.wallet != "untouched" {
        return Err(format!("wallet or human contacted: {}", observed.wallet));
    }
    Ok("token issued and resource fetched, steps 3-10 logged, no wallet/human traffic".into())
}

fn negotiation(report: &ConformanceReport) -> Verdict {
    let mut seen = Vec::new();
    for name in ["negotiation_both", "negotiation_lvp_only", "negotiation_none"] {
        let s = scenario(report, name)?;
        passed(s)?;
        seen.push(format!("{name} -> {}", s.observed.as_ref().expect("outcome").consumer));
    }
    Ok(seen.join("; "))
}

fn replay(report: &ConformanceReport) -> Verdict {
    let sequential = scenario(report, "lvp_replay")?;
    passed(sequential)?;
    let concurrent = scenario(report, "lvp_replay_concurrent")?;
    passed(concurrent)?;
    let expected = format!("accepted=1; Replay={}", CONCURRENT_DUPLICATES - 1);
    let provider = &concurrent.observed.as_ref().expect("outcome").provider;
    if !provider.ends_with(&expected) {
        return Err(format!("concurrent duplicates: {provider}"));
    }
    Ok(format!("duplicate rejected Replay; {CONCURRENT_DUPLICATES} simultaneous duplicates -> {expected}"))
}

fn window(report: &ConformanceReport) -> Verdict {
    let early = scenario(report, "lvp_window_early")?;
    let late = scenario(report, "lvp_window_late")?;
    let edges = scenario(report, "lvp_window_edges")?;
    for s in [early, late, edges] {
        passed(s)?;
    }
    // The consumer signs a 120 s window from its own clock.
    let offset = |name| gnap4vp_harness::find(name).expect("catalog").topology.consumer_clock_offset;
    let want = (WINDOW_MARGIN_SECS, -(120 + WINDOW_MARGIN_SECS));
    let got = (offset("lvp_window_early"), offset("lvp_window_late"));
    if got != want {
        return Err(format!("window scenarios run at consumer offsets {got:?}, want {want:?}"));
    }
    Ok(format!(
        "now = valid_from - {WINDOW_MARGIN_SECS} and now = valid_until + {WINDOW_MARGIN_SECS} rejected WindowViolation; both exact edges accepted"
    ))
}

fn token_binding(report: &ConformanceReport) -> Verdict {
    let s = scenario(report, "token_theft")?;
    passed(s)?;
    if THEFT_ATTEMPTS < 100 {
        return Err(format!("only {THEFT_ATTEMPTS} attempts"));
    }
    Ok(s.observed.as_ref().expect("outcome").provider.clone())
}

fn trusted_issuer(report: &ConformanceReport) -> Verdict {
    let mut lines = Vec::new();
    for (happy, gated, reason) in [
        ("wallet_happy_automated", "untrusted_issuer_wallet", "denied:UntrustedIssuer"),
        ("lvp_happy", "untrusted_issuer_lvp", "failed:UntrustedIssuer"),
    ] {
        let h = scenario(report, happy)?;
        let g = scenario(report, gated)?;
        passed(h)?;
        passed(g)?;
        let o = g.observed.as_ref().expect("outcome");
        if !format!("{} {}", o.consumer, o.wallet).contains(reason) {
            return Err(format!("{gated}: {o:?} lacks {reason}"));
        }
        lines.push(format!("{gated}: {reason}"));
    }
    Ok(lines.join("; "))
}

fn mutation_killing(defended: &ConformanceReport) -> Verdict {
    let adversarial: Vec<&ScenarioReport> = defended.scenarios.iter().filter(|s| s.defense.is_some()).collect();
    let survivors: Vec<&str> = adversarial.iter().filter(|s| s.passed()).map(|s| s.name.as_str()).collect();
    if !defended.defenses_disabled || adversarial.is_empty() {
        return Err("no defended scenarios ran with defenses off".into());
    }
    if !survivors.is_empty() {
        return Err(format!("still pass with their defense disabled: {survivors:?}"));
    }
    let plain: Vec<&str> =
        defended.scenarios.iter().filter(|s| s.defense.is_none() && !s.passed()).map(|s| s.name.as_str()).collect();
    if !plain.is_empty() {
        return Err(format!("undefended scenarios broke: {plain:?}"));
    }
    Ok(format!("{} of {} adversarial scenarios fail with their defense off", adversarial.len(), adversarial.len()))
}

#[derive(Debug, Clone)]
enum Edit {
    Replace(usize, u8),
    Truncate(usize),
    Append(u8),
    Empty,
}

fn apply(value: &str, edit: &Edit) -> String {
    let mut bytes = value.as_bytes().to_vec();
    match edit {
        Edit::Replace(i, c) => {
            let i = i % bytes.len();
            let mut c = *c;
            if c == bytes[i] {
                c = B64URL[(B64URL.iter().position(|b| *b == c).unwrap() + 1) % B64URL.len()];
            }
            bytes[i] = c;
        }
        Edit::Truncate(n) => bytes.truncate(n % bytes.len()),
        Edit::Append(c) => bytes.push(*c),
        Edit::Empty => bytes.clear(),
    }
    String::from_utf8(bytes).expect("ascii")
}

fn edit() -> impl Strategy<Value = Edit> {
    let c = proptest::sample::select(B64URL.to_vec());
    prop_oneof![
        4 => (any::<usize>(), c.clone()).prop_map(|(i, c)| Edit::Replace(i, c)),
        2 => any::<usize>().prop_map(Edit::Truncate),
        1 => c.prop_map(Edit::Append),
        1 => Just(Edit::Empty),
    ]
}

/// Rewrites one query parameter on the wallet's callback redirect.
fn tamper(url: &str, field: &str, edit: &Edit) -> String {
    let (base, query) = url.split_once('?').unwrap_or((url, ""));
    let pairs: Vec<String> = query
        .split('&')
        .map(|pair| match pair.split_once('=') {
            Some((k, v)) if k == field => format!("{k}={}", apply(v, edit)),
            _ => pair.to_string(),
        })
        .collect();
    format!("{base}?{}", pairs.join("&"))
}

fn manual_session(d: &Deployment) -> Result<String, String> {
    let start = d.machine_start(&[FlowId::WalletInteraction]).map_err(|e| e.label().to_string())?;
    let qr = Deployment::qr_payload(&start).ok_or("no QR payload")?;
    let ex = d.human_ingest(qr).map_err(|e| e.label().to_string())?;
    d.human_approve(&ex.local_id, d.membership_selection()).map_err(|e| e.label().to_string())?;
    Ok(start.session.session_id)
}

fn hash_binding() -> Verdict {
    let topology = Topology { consumer_mode: DeliveryMode::Manual, ..Topology::default() };
    let d = Deployment::build(topology, TransportKind::Loopback, 11).map_err(|e| e.to_string())?;

    let control = manual_session(&d)?;
    d.machine_fetch(&control).map_err(|e| format!("unmutated control session failed: {}", e.label()))?;
    let baseline = d.consumer.continuations_sent();

    let mut runner = TestRunner::new_with_rng(
        Config { cases: HASH_CASES, failure_persistence: None, ..Config::default() },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    let cases = std::cell::Cell::new(0u32);
    let strategy = (prop_oneof![Just("interaction_ref"), Just("hash")], edit());
    runner
        .run(&strategy, |(field, e)| {
            cases.set(cases.get() + 1);
            let e2 = e.clone();
            d.traffic.clear_interceptors();
            d.traffic.intercept(Arc::new(move |origin: &str, req: &mut HttpRequest| {
                if origin == "wallet" && req.method == "GET" && req.path().starts_with("/callback") {
                    req.url = tamper(&req.url, field, &e2);
                }
            }));
            let sid = manual_session(&d).map_err(TestCaseError::fail)?;
            let _ = d.machine_fetch(&sid);
            let session = d.consumer.session(&sid).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(session.status, gnap4vp_consumer::SessionStatus::Failed, "{} {:?}", field, e);
            prop_assert_eq!(d.consumer.continuations_sent(), baseline, "{} {:?}", field, e);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    d.traffic.clear_interceptors();
    if cases.get() < HASH_CASES_REQUIRED {
        return Err(format!("only {} cases ran", cases.get()));
    }
    Ok(format!(
        "{} mutated callbacks aborted, {} continuations",
        cases.get(),
        d.consumer.continuations_sent() - baseline
    ))
}

fn core_fixture(name: &str) -> String {
    let path = format!("{}/../core/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

#[derive(Deserialize)]
struct UrlRow {
    did: String,
    url: String,
}

#[derive(Deserialize)]
struct HashRow {
    client_nonce: String,
    server_nonce: String,
    interaction_ref: String,
    grant_endpoint: String,
    hash: String,
}

fn oracles() -> Verdict {
    let urls: Vec<UrlRow> = serde_json::from_str(&core_fixture("did_web_urls.json")).map_err(|e| e.to_string())?;
    if urls.len() != DID_WEB_ROWS {
        return Err(format!("did:web table has {} rows", urls.len()));
    }
    for r in &urls {
        let got = did_web_to_url(&r.did).map_err(|e| format!("{}: {e}", r.did))?;
        if got != r.url {
            return Err(format!("{} -> {got}, oracle {}", r.did, r.url));
        }
    }

    let rng = RandomSource::seeded(2024, "acceptance-matcher");
    let mut instances = 0;
    for descriptors in 0..=MATCHER_MAX_DESCRIPTORS {
        for held in 0..=MATCHER_MAX_CREDENTIALS {
            for _ in 0..8 {
                let def = matcher::definition(&rng, descriptors);
                let creds: Vec<Credential> = (0..held).map(|i| matcher::credential(&rng, i)).collect();
                if match_definition(&def, &creds) != matcher::brute_force(&def, &creds) {
                    return Err(format!("matcher disagrees at {descriptors} descriptors x {held} credentials"));
                }
                instances += 1;
            }
        }
    }

    let rows: Vec<HashRow> = serde_json::from_str(&core_fixture("interaction_hash.json")).map_err(|e| e.to_string())?;
    if rows.len() != HASH_ROWS {
        return Err(format!("hash table has {} rows", rows.len()));
    }
    for r in &rows {
        let got = interaction_hash(&r.client_nonce, &r.server_nonce, &r.interaction_ref, &r.grant_endpoint)
            .map_err(|e| e.to_string())?;
        if got != r.hash {
            return Err(format!("hash of {:?} -> {got}, oracle {}", r.interaction_ref, r.hash));
        }
    }
    Ok(format!("{DID_WEB_ROWS} did:web rows, {instances} matcher instances, {HASH_ROWS} hash tuples"))
}

fn main() {
    let started = Instant::now();
    let report = run_suite("all", &RunOptions::default());
    let elapsed = started.elapsed();
    let killing = run_suite("all", &RunOptions { disable_defense: true, ..RunOptions::default() });

    let criteria: Vec<(&str, Verdict)> = vec![
        ("wallet end-to-end", wallet_e2e(&report, elapsed)),
        ("lvp end-to-end", lvp_e2e(&report)),
        ("negotiation", negotiation(&report)),
        ("replay defense", replay(&report)),
        ("validity window", window(&report)),
        ("token binding", token_binding(&report)),
        ("hash binding", hash_binding()),
        ("trusted-issuer gate", trusted_issuer(&report)),
        ("oracle equivalence", oracles()),
        ("mutation killing", mutation_killing(&killing)),
    ];
    let mut failed = 0;
    for (name, verdict) in &criteria {
        match verdict {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {name}: {why}");
            }
        }
    }
    if !report.ok {
        failed += 1;
        println!(
            "[FAIL] suite: {}/{} passed, unexercised {:?}",
            report.summary.passed, report.summary.total, report.coverage.unexercised
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed.min(criteria.len()), criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
