use std::collections::BTreeMap;
use std::time::Instant;

use gnap4vp_core::model::FlowId;
use serde::{Deserialize, Serialize};

use crate::catalog::scenarios;
use crate::scenario::{run_scenario, RoleOutcomes, RunOptions, Scenario, ScenarioReport, Verdict};
use crate::topology::{Topology, TransportKind};

pub const REPORT_SCHEMA: &str = "gnap4vp-conformance/1";

pub fn flow_steps(flow: FlowId) -> std::ops::RangeInclusive<u8> {
    match flow {
        FlowId::WalletInteraction => 1..=15,
        FlowId::LvpAuthorization => 1..=10,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

/// Which scenarios exercised each step, and the steps none did.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub wallet_interaction: BTreeMap<u8, Vec<String>>,
    pub lvp_authorization: BTreeMap<u8, Vec<String>>,
    /// `flow:step` pairs.
    pub unexercised: Vec<String>,
}

impl Coverage {
    pub fn of(reports: &[ScenarioReport]) -> Self {
        let per_flow = |flow: FlowId| -> BTreeMap<u8, Vec<String>> {
            flow_steps(flow)
                .map(|step| {
                    let names = reports
                        .iter()
                        .filter(|r| r.steps.get(&flow).is_some_and(|s| s.contains(&step)))
                        .map(|r| r.name.clone())
                        .collect();
                    (step, names)
                })
                .collect()
        };
        let wallet_interaction = per_flow(FlowId::WalletInteraction);
        let lvp_authorization = per_flow(FlowId::LvpAuthorization);
        let unexercised =
            [(FlowId::WalletInteraction, &wallet_interaction), (FlowId::LvpAuthorization, &lvp_authorization)]
                .iter()
                .flat_map(|(flow, steps)| {
                    steps
                        .iter()
                        .filter(|(_, names)| names.is_empty())
                        .map(move |(step, _)| format!("{}:{step}", flow.as_str()))
                })
                .collect();
        Self { wallet_interaction, lvp_authorization, unexercised }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConformanceReport {
    pub schema: String,
    pub transport: TransportKind,
    pub seed: u64,
    /// Capability override, when one was given.
    pub provider_flows: Option<Vec<FlowId>>,
    pub filter: String,
    pub defenses_disabled: bool,
    pub summary: Summary,
    pub coverage: Coverage,
    pub scenarios: Vec<ScenarioReport>,
    pub duration_ms: u64,
    /// No failures, and for the full suite every step exercised.
    pub ok: bool,
}

impl ConformanceReport {
    pub fn scenario(&self, name: &str) -> Option<&ScenarioReport> {
        self.scenarios.iter().find(|s| s.name == name)
    }

    /// The report minus timings.
    pub fn fingerprint(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v["duration_ms"] = serde_json::Value::Null;
        v["scenarios"] = self.scenarios.iter().map(ScenarioReport::fingerprint).collect();
        v
    }
}

fn errored(s: &Scenario, e: impl std::fmt::Display) -> ScenarioReport {
    ScenarioReport {
        name: s.name.into(),
        tags: s.tags.iter().map(|t| t.to_string()).collect(),
        flows: s.flows.to_vec(),
        provider_flows: Topology::default().provider_flows,
        mutation: s.mutation.clone(),
        defense: s.defense,
        defense_disabled: false,
        expected: s.expected.clone(),
        observed: None::<RoleOutcomes>,
        violations: Vec::new(),
        error: Some(e.to_string()),
        verdict: Verdict::Fail,
        duration_ms: 0,
        steps: BTreeMap::new(),
        transcript: Vec::new(),
    }
}

pub fn run_selected(selected: &[Scenario], opts: &RunOptions) -> Vec<ScenarioReport> {
    selected.iter().map(|s| run_scenario(s, opts).unwrap_or_else(|e| errored(s, e))).collect()
}

/// Runs every scenario whose name or tag matches `filter` (`all` for everything).
pub fn run_suite(filter: &str, opts: &RunOptions) -> ConformanceReport {
    let started = Instant::now();
    let selected: Vec<Scenario> = scenarios().into_iter().filter(|s| s.matches(filter)).collect();
    let reports = run_selected(&selected, opts);
    let passed = reports.iter().filter(|r| r.passed()).count();
    let coverage = Coverage::of(&reports);
    let failed = reports.len() - passed;
    let ok = failed == 0 && !reports.is_empty() && (filter != "all" || coverage.unexercised.is_empty());
    ConformanceReport {
        schema: REPORT_SCHEMA.into(),
        transport: opts.transport,
        seed: opts.seed,
        provider_flows: opts.provider_flows.clone(),
        filter: filter.into(),
        defenses_disabled: opts.disable_defense,
        summary: Summary { total: reports.len(), passed, failed },
        coverage,
        scenarios: reports,
        duration_ms: started.elapsed().as_millis() as u64,
        ok,
    }
}
