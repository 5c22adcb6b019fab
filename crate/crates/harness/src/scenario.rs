use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use gnap4vp_consumer::ConsumerDefenses;
use gnap4vp_core::model::{FlowId, InteractionResult};
use gnap4vp_core::transcript::TranscriptEntry;
use gnap4vp_core::transport::authority_of;
use gnap4vp_wallet::WalletStatus;
use serde::{Deserialize, Serialize};

use crate::fixtures::{CONSUMER_AUTHORITY, WALLET_AUTHORITY};
use crate::topology::{Deployment, ScenarioError, Topology, TransportKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    FlipPayloadByte,
    SubstituteInteractionRef,
    ReplayMessage,
    StripPossessionProof,
    SwapSigningKey,
    ShiftValidityWindow,
    RemoveIssuerFromRegistry,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutation {
    /// Which message or configuration item the transform touches.
    pub target: String,
    pub transform: Transform,
}

impl Mutation {
    pub fn new(target: &str, transform: Transform) -> Self {
        Self { target: target.to_string(), transform }
    }
}

/// A single defense that a test hook can switch off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Defense {
    ReplayGuard,
    MetadataWindow,
    MetadataSignature,
    PossessionProof,
    ContinuationProof,
    InteractionRef,
    IssuerRegistry,
    PresentationNonce,
    CallbackHash,
}

impl Defense {
    pub fn disable(self, d: &Deployment) {
        let mut p = d.provider.defenses();
        match self {
            Defense::ReplayGuard => p.replay_guard = false,
            Defense::MetadataWindow => p.metadata_window = false,
            Defense::MetadataSignature => p.metadata_signature = false,
            Defense::PossessionProof => p.possession_proof = false,
            Defense::ContinuationProof => p.continuation_proof = false,
            Defense::InteractionRef => p.interaction_ref = false,
            Defense::IssuerRegistry => p.presentation.issuer_registry = false,
            Defense::PresentationNonce => p.presentation.audience_nonce = false,
            Defense::CallbackHash => {
                d.consumer.set_defenses(ConsumerDefenses { verify_callback_hash: false });
                return;
            }
        }
        d.provider.set_defenses(p);
    }
}

/// Terminal state of every role, as comparable strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleOutcomes {
    pub consumer: String,
    pub provider: String,
    pub wallet: String,
}

impl RoleOutcomes {
    pub fn new(consumer: impl Into<String>, provider: impl Into<String>, wallet: impl Into<String>) -> Self {
        Self { consumer: consumer.into(), provider: provider.into(), wallet: wallet.into() }
    }

    /// What any scenario observes when the provider lacks the flow it needs.
    pub fn flow_not_supported() -> Self {
        Self::new("failed:FlowNotSupported", "none", "untouched")
    }
}

pub type Script = fn(&Deployment) -> Result<RoleOutcomes, String>;

#[derive(Clone)]
pub struct Scenario {
    pub name: &'static str,
    pub tags: &'static [&'static str],
    /// Flows the script needs from the provider.
    pub flows: &'static [FlowId],
    pub topology: Topology,
    /// Negotiation scenarios set provider capabilities themselves.
    pub fixed_capabilities: bool,
    pub mutation: Option<Mutation>,
    pub defense: Option<Defense>,
    /// Runs requests concurrently; its transcript is compared as a set.
    pub parallel: bool,
    pub setup: Option<fn(&Deployment)>,
    pub expected: RoleOutcomes,
    pub script: Script,
}

impl Scenario {
    pub fn matches(&self, filter: &str) -> bool {
        filter == "all" || self.name == filter || self.tags.contains(&filter)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    pub transport: TransportKind,
    pub seed: u64,
    /// Replaces provider capabilities for scenarios that do not fix them.
    pub provider_flows: Option<Vec<FlowId>>,
    /// Switch off each scenario's defense before running it.
    pub disable_defense: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { transport: TransportKind::Loopback, seed: 7, provider_flows: None, disable_defense: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub tags: Vec<String>,
    pub flows: Vec<FlowId>,
    pub provider_flows: Vec<FlowId>,
    pub mutation: Option<Mutation>,
    pub defense: Option<Defense>,
    pub defense_disabled: bool,
    pub expected: RoleOutcomes,
    pub observed: Option<RoleOutcomes>,
    pub violations: Vec<String>,
    pub error: Option<String>,
    pub verdict: Verdict,
    pub duration_ms: u64,
    pub steps: BTreeMap<FlowId, Vec<u8>>,
    pub transcript: Vec<TranscriptEntry>,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// The report without timings: equal across same-seed runs.
    pub fn fingerprint(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v["duration_ms"] = serde_json::Value::Null;
        for e in v["transcript"].as_array_mut().expect("transcript array") {
            e["at"] = serde_json::Value::Null;
        }
        v
    }
}

pub fn run_scenario(s: &Scenario, opts: &RunOptions) -> Result<ScenarioReport, ScenarioError> {
    let started = Instant::now();
    let mut topology = s.topology.clone();
    if let (false, Some(flows)) = (s.fixed_capabilities, &opts.provider_flows) {
        topology.provider_flows = flows.clone();
    }
    let probe = !s.fixed_capabilities && s.flows.iter().any(|f| !topology.provider_flows.contains(f));
    let expected = if probe { RoleOutcomes::flow_not_supported() } else { s.expected.clone() };
    let provider_flows = topology.provider_flows.clone();

    let d = Deployment::build(topology, opts.transport, opts.seed)?;
    if let Some(setup) = s.setup {
        setup(&d);
    }
    let defense_disabled = opts.disable_defense && s.defense.is_some();
    if let (true, Some(defense)) = (opts.disable_defense, s.defense) {
        defense.disable(&d);
    }
    let outcome = if probe {
        let _ = d.machine_start(s.flows);
        Ok(outcomes(&d))
    } else {
        (s.script)(&d)
    };
    let violations = violations(&d);

    let mut transcript = d.transcript.entries();
    if s.parallel {
        transcript.sort_by(|a, b| (a.flow, a.step, &a.actor, &a.note).cmp(&(b.flow, b.step, &b.actor, &b.note)));
    }
    let mut steps: BTreeMap<FlowId, Vec<u8>> = BTreeMap::new();
    for e in &transcript {
        steps.entry(e.flow).or_default().push(e.step);
    }
    for v in steps.values_mut() {
        v.sort_unstable();
        v.dedup();
    }
    let (observed, error) = match outcome {
        Ok(o) => (Some(o), None),
        Err(e) => (None, Some(e)),
    };
    let verdict =
        if observed.as_ref() == Some(&expected) && violations.is_empty() { Verdict::Pass } else { Verdict::Fail };
    Ok(ScenarioReport {
        name: s.name.to_string(),
        tags: s.tags.iter().map(|t| t.to_string()).collect(),
        flows: s.flows.to_vec(),
        provider_flows,
        mutation: s.mutation.clone(),
        defense: s.defense,
        defense_disabled,
        expected,
        observed,
        violations,
        error,
        verdict,
        duration_ms: started.elapsed().as_millis() as u64,
        steps,
        transcript,
    })
}

fn snake<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn joined(mut items: Vec<String>) -> String {
    if items.is_empty() {
        return "none".into();
    }
    items.sort();
    items.join(",")
}

/// Consumer sessions as sorted `status[:failure]`.
pub fn consumer_outcome(d: &Deployment) -> String {
    joined(
        d.consumer
            .sessions()
            .iter()
            .map(|s| match &s.failure {
                Some(f) => format!("{}:{f}", snake(&s.status)),
                None => snake(&s.status),
            })
            .collect(),
    )
}

/// Provider grants as sorted statuses.
pub fn provider_outcome(d: &Deployment) -> String {
    joined(d.provider.grants().iter().map(|g| snake(&g.status)).collect())
}

/// Wallet exchanges as sorted `status[:failure][(denied:reason)]`;
/// `untouched` when nothing reached the wallet or the human.
pub fn wallet_outcome(d: &Deployment) -> String {
    let exchanges = d.wallet.exchanges(None);
    if exchanges.is_empty() {
        let involved = d.contacted(WALLET_AUTHORITY) || d.traffic.records().iter().any(|r| r.origin == "human");
        return if involved { "contacted".into() } else { "untouched".into() };
    }
    joined(
        exchanges
            .iter()
            .map(|e| {
                let mut s = snake(&e.status);
                if let Some(f) = &e.failure {
                    s = format!("{s}:{f}");
                }
                if let Some(r) = e.result.as_ref().filter(|r| r.result == InteractionResult::Denied) {
                    s = format!("{s}(denied:{})", r.reason.as_deref().unwrap_or("unspecified"));
                }
                s
            })
            .collect(),
    )
}

pub fn outcomes(d: &Deployment) -> RoleOutcomes {
    RoleOutcomes::new(consumer_outcome(d), provider_outcome(d), wallet_outcome(d))
}

/// Checks that hold in every scenario regardless of its expected outcome.
pub fn violations(d: &Deployment) -> Vec<String> {
    let mut out = Vec::new();
    for r in d.traffic.records().iter().filter(|r| r.origin == "machine") {
        let authority = authority_of(&r.url).unwrap_or_default();
        if authority != CONSUMER_AUTHORITY {
            out.push(format!("consumer machine contacted {authority}"));
        }
    }
    for s in d.wallet.submissions().iter().filter(|s| s.refusal.is_none()) {
        if s.status_before == WalletStatus::AwaitingApproval {
            out.push(format!("wallet exchange {} submitted while awaiting approval", s.local_id));
        }
        let chosen: BTreeSet<&String> = s.selection.iter().flat_map(|sel| sel.values()).collect();
        let sent: BTreeSet<&String> = s.presented.iter().collect();
        if chosen != sent {
            out.push(format!("wallet exchange {} presented {:?}, selected {:?}", s.local_id, sent, chosen));
        }
        if let Ok(ex) = d.wallet.exchange(&s.local_id) {
            if s.nonce != ex.server_nonce || s.audience != ex.audience {
                out.push(format!("wallet exchange {} VP not bound to the provider nonce and audience", s.local_id));
            }
        }
    }
    if let Err(tokens) = d.provider.audit_issuance() {
        out.push(format!("tokens without a recorded acceptance: {tokens:?}"));
    }
    if d.provider.grants().iter().any(|g| !g.invariant_holds()) {
        out.push("provider grant invariant broken".into());
    }
    if d.consumer.sessions().iter().any(|s| !s.invariant_holds()) {
        out.push("consumer session invariant broken".into());
    }
    if d.wallet.exchanges(None).iter().any(|e| !e.invariant_holds()) {
        out.push("wallet approval-queue invariant broken".into());
    }
    out
}
