use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use gnap4vp_core::clock::SystemClock;
use gnap4vp_core::did::DidResolver;
use gnap4vp_core::http::{HttpServer, HttpTransport};
use gnap4vp_core::random::RandomSource;
use gnap4vp_core::transcript::StepLog;
use gnap4vp_core::transport::Client;
use gnap4vp_core::vc::TrustedIssuerRegistry;
use gnap4vp_provider::{ProviderConfig, ProviderDeps, ProviderService};

#[derive(Parser)]
#[command(name = "provider", about = "GNAP4VP authorization and resource server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the grant, VP exchange, continuation and resource endpoints.
    Serve {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `bind` from the config file.
        #[arg(long)]
        bind: Option<String>,
    },
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("provider: {e}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    let Command::Serve { config, bind } = cli.command;
    let config = ProviderConfig::load(&config)?;
    let registry = match &config.registry_path {
        Some(p) => TrustedIssuerRegistry::load(p)?,
        None => TrustedIssuerRegistry::new(),
    };
    let transport = Arc::new(HttpTransport::new());
    for (authority, addr) in &config.hosts {
        transport.route(authority, addr.parse::<SocketAddr>()?);
    }
    let client = Arc::new(Client::new("provider", transport));
    let clock = Arc::new(SystemClock);
    let deps = ProviderDeps {
        resolver: Arc::new(DidResolver::new(client.clone(), clock.clone())),
        fetcher: client,
        clock,
        rng: RandomSource::from_os(),
        steps: StepLog::disabled(),
    };
    let bind = bind.or_else(|| config.bind.clone()).unwrap_or_else(|| "127.0.0.1:8080".into());
    let public = config.public_base.clone();
    let snapshot = config.snapshot_path.clone();
    let service = Arc::new(ProviderService::new(config, registry, deps));
    if let Some(path) = snapshot.filter(|p| p.exists()) {
        service.load_snapshot(&path)?;
        eprintln!("provider: restored state from {}", path.display());
    }
    let server = HttpServer::start(&bind, &public, service)?;
    eprintln!("provider: serving {public} on {}", server.addr());
    loop {
        std::thread::park();
    }
}
