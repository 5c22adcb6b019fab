use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gnap4vp_core::model::FlowId;
use gnap4vp_harness::fixtures::write_fixtures;
use gnap4vp_harness::{run_suite, scenarios, RunOptions, TransportKind};

#[derive(Parser)]
#[command(name = "harness", about = "GNAP4VP conformance harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios and print one line per scenario.
    Run {
        /// Scenario name or tag; `all` runs everything.
        #[arg(long, default_value = "all")]
        scenario: String,
        #[arg(long, default_value = "loopback")]
        transport: TransportKind,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Override provider capabilities, e.g. `lvp_authorization` or `none`.
        #[arg(long, value_delimiter = ',')]
        provider_flows: Option<Vec<String>>,
        /// Switch off each scenario's defense; every defended scenario should then fail.
        #[arg(long)]
        disable_defenses: bool,
    },
    /// List scenarios with their tags, mutation and defense.
    List,
    /// Write issuer and holder key material, DID documents and credentials.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn parse_flows(raw: &[String]) -> Result<Vec<FlowId>, String> {
    raw.iter()
        .filter(|f| f.as_str() != "none" && !f.is_empty())
        .map(|f| f.parse().map_err(|e: gnap4vp_core::model::UnknownFlow| format!("unknown flow {}", e.0)))
        .collect()
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { scenario, transport, seed, report, provider_flows, disable_defenses } => {
            let provider_flows = match provider_flows.as_deref().map(parse_flows).transpose() {
                Ok(f) => f,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            let opts = RunOptions { transport, seed, provider_flows, disable_defense: disable_defenses };
            let result = run_suite(&scenario, &opts);
            if result.scenarios.is_empty() {
                eprintln!("no scenario matches {scenario}");
                return ExitCode::from(2);
            }
            for s in &result.scenarios {
                let verdict = if s.passed() { "PASS" } else { "FAIL" };
                println!("{verdict} {} ({} ms)", s.name, s.duration_ms);
                if !s.passed() {
                    println!("  expected {:?}", s.expected);
                    println!("  observed {:?}", s.observed);
                    for v in &s.violations {
                        println!("  violation: {v}");
                    }
                    if let Some(e) = &s.error {
                        println!("  error: {e}");
                    }
                }
            }
            for gap in &result.coverage.unexercised {
                println!("unexercised step {gap}");
            }
            println!(
                "{}/{} passed in {} ms over {:?}",
                result.summary.passed, result.summary.total, result.duration_ms, result.transport
            );
            if let Some(path) = report {
                let json = serde_json::to_string_pretty(&result).expect("report serializes");
                if let Err(e) = std::fs::write(&path, json) {
                    eprintln!("cannot write {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            }
            if result.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::List => {
            for s in scenarios() {
                let mutation = s.mutation.map(|m| format!("{:?} on {}", m.transform, m.target)).unwrap_or_default();
                let defense = s.defense.map(|d| format!("{d:?}")).unwrap_or_default();
                println!("{:<28} [{}] {mutation} {defense}", s.name, s.tags.join(","));
            }
            ExitCode::SUCCESS
        }
        Command::Fixtures { out, count, seed } => match write_fixtures(&out, count, seed) {
            Ok(holders) => {
                for h in holders {
                    println!("{h}");
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("cannot write fixtures: {e}");
                ExitCode::FAILURE
            }
        },
    }
}
