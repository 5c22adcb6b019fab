use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use gnap4vp_core::clock::SystemClock;
use gnap4vp_core::crypto::KeyPair;
use gnap4vp_core::http::{HttpServer, HttpTransport};
use gnap4vp_core::random::RandomSource;
use gnap4vp_core::transcript::StepLog;
use gnap4vp_core::transport::{Client, HttpRequest};
use gnap4vp_core::vc::{CredentialStore, Selection};
use gnap4vp_wallet::{ApproveRequest, IngestRequest, WalletAgent, WalletConfig, WalletDeps, WalletMode};

const DEFAULT_ENDPOINT: &str = "http://127.0.0.1:8082";

#[derive(Parser)]
#[command(name = "wallet", about = "GNAP4VP wallet agent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Manual,
    Automated,
}

#[derive(Subcommand)]
enum Command {
    /// Run the agent: wallet API plus the /ui static files.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        bind: Option<String>,
    },
    /// Hand a VP Exchange URI (the QR payload) to a running agent.
    Ingest {
        uri: String,
        #[arg(long, value_enum, default_value = "manual")]
        mode: Mode,
        #[arg(long, default_value = DEFAULT_ENDPOINT)]
        endpoint: String,
    },
    /// List exchanges, optionally by status (e.g. awaiting_approval).
    List {
        #[arg(long)]
        status: Option<String>,
        #[arg(long, default_value = DEFAULT_ENDPOINT)]
        endpoint: String,
    },
    Show {
        id: String,
        #[arg(long, default_value = DEFAULT_ENDPOINT)]
        endpoint: String,
    },
    /// Approve with `--select descriptor=credential`, repeated per descriptor.
    Approve {
        id: String,
        #[arg(long = "select", value_parser = parse_pick)]
        picks: Vec<(String, String)>,
        #[arg(long, default_value = DEFAULT_ENDPOINT)]
        endpoint: String,
    },
    Deny {
        id: String,
        #[arg(long, default_value = DEFAULT_ENDPOINT)]
        endpoint: String,
    },
}

fn parse_pick(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(d, c)| (d.to_string(), c.to_string()))
        .ok_or_else(|| format!("expected descriptor=credential, got {s}"))
}

type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("wallet: {e}");
        std::process::exit(1);
    }
}

fn call(req: HttpRequest) -> Result<()> {
    let resp = Client::new("wallet-cli", Arc::new(HttpTransport::new())).send(req)?;
    if !resp.is_success() {
        let body = resp.error_body();
        return Err(format!("{} ({})", body.label(), body.description.as_deref().unwrap_or_default()).into());
    }
    let value: serde_json::Value = resp.parse()?;
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Serve { config, bind } => serve(config, bind),
        Command::Ingest { uri, mode, endpoint } => {
            let mode = match mode {
                Mode::Manual => WalletMode::Manual,
                Mode::Automated => WalletMode::Automated,
            };
            call(HttpRequest::post_json(format!("{endpoint}/wallet/exchanges"), &IngestRequest { uri, mode }))
        }
        Command::List { status, endpoint } => {
            let query = status.map(|s| format!("?status={s}")).unwrap_or_default();
            call(HttpRequest::get(format!("{endpoint}/wallet/exchanges{query}")))
        }
        Command::Show { id, endpoint } => call(HttpRequest::get(format!("{endpoint}/wallet/exchanges/{id}"))),
        Command::Approve { id, picks, endpoint } => {
            let selection: Selection = picks.into_iter().collect();
            call(HttpRequest::post_json(
                format!("{endpoint}/wallet/exchanges/{id}/approve"),
                &ApproveRequest { selection },
            ))
        }
        Command::Deny { id, endpoint } => {
            call(HttpRequest::new("POST", format!("{endpoint}/wallet/exchanges/{id}/deny")))
        }
    }
}

fn serve(config: PathBuf, bind: Option<String>) -> Result<()> {
    let config = WalletConfig::load(&config)?;
    let key = KeyPair::load(config.key_path.as_deref().ok_or("config needs key_path")?)?;
    let store = match &config.store_path {
        Some(p) => CredentialStore::load(p)?,
        None => CredentialStore::new(config.holder_did.clone()),
    };
    let transport = Arc::new(HttpTransport::new());
    for (authority, addr) in &config.hosts {
        transport.route(authority, addr.parse::<SocketAddr>()?);
    }
    let deps = WalletDeps {
        client: Client::new("wallet", transport),
        clock: Arc::new(SystemClock),
        rng: RandomSource::from_os(),
        steps: StepLog::disabled(),
    };
    let bind = bind.or_else(|| config.bind.clone()).unwrap_or_else(|| "127.0.0.1:8082".into());
    let public = config.public_base.clone().unwrap_or_else(|| format!("http://{bind}"));
    let agent = Arc::new(WalletAgent::new(config, store, key, deps)?);
    let server = HttpServer::start(&bind, &public, agent)?;
    eprintln!("wallet: serving {public} on {}", server.addr());
    loop {
        std::thread::park();
    }
}
