//! Conformance harness: deploys every role on one recorded transport, runs
//! scripted and adversarial scenarios, and reports per-role outcomes.

pub mod catalog;
pub mod fixtures;
pub mod scenario;
pub mod suite;
pub mod topology;

pub use catalog::{find, scenarios};
pub use scenario::{
    outcomes, run_scenario, violations, Defense, Mutation, RoleOutcomes, RunOptions, Scenario, ScenarioReport,
    Transform, Verdict,
};
pub use suite::{run_suite, ConformanceReport, Coverage, Summary, REPORT_SCHEMA};
pub use topology::{ConsumerKey, Deployment, ScenarioError, Topology, TransportKind};
