use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use gnap4vp_consumer::{ConsumerConfig, ConsumerDeps, ConsumerInstance, FetchRequest, StartRequest, StartResponse};
use gnap4vp_core::clock::SystemClock;
use gnap4vp_core::crypto::KeyPair;
use gnap4vp_core::http::{HttpServer, HttpTransport};
use gnap4vp_core::model::FlowId;
use gnap4vp_core::random::RandomSource;
use gnap4vp_core::transcript::StepLog;
use gnap4vp_core::transport::{Client, HttpRequest, HttpResponse};

const DEFAULT_ENDPOINT: &str = "http://127.0.0.1:8081";

#[derive(Parser)]
#[command(name = "consumer", about = "GNAP4VP consumer instance and machine-side CLI")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the consumer instance: wallet callback plus the machine session API.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        bind: Option<String>,
    },
    /// Start a session on a running instance and request a grant.
    Start {
        /// Flow id, or a comma-separated preference list.
        #[arg(long)]
        flow: String,
        #[arg(long)]
        provider: String,
        /// Comma-separated right labels.
        #[arg(long)]
        rights: String,
        #[arg(long, default_value = "cli")]
        machine: String,
        #[arg(long, default_value = "")]
        secret: String,
        #[arg(long, default_value = DEFAULT_ENDPOINT)]
        endpoint: String,
    },
    /// Show a session.
    Status {
        session: String,
        #[arg(long, default_value = DEFAULT_ENDPOINT)]
        endpoint: String,
    },
    /// Continue the grant if needed and fetch a protected resource.
    Fetch {
        session: String,
        path: String,
        #[arg(long, default_value = DEFAULT_ENDPOINT)]
        endpoint: String,
    },
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("consumer: {e}");
        std::process::exit(1);
    }
}

type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;

fn call(req: HttpRequest) -> Result<serde_json::Value> {
    let client = Client::new("machine", Arc::new(HttpTransport::new()));
    let resp: HttpResponse = client.send(req)?;
    if !resp.is_success() {
        let body = resp.error_body();
        return Err(format!("{} ({})", body.label(), body.description.as_deref().unwrap_or_default()).into());
    }
    Ok(resp.parse()?)
}

fn print(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Serve { config, bind } => serve(config, bind),
        Command::Start { flow, provider, rights, machine, secret, endpoint } => {
            let flow_preferences =
                flow.split(',').map(|f| f.trim().parse::<FlowId>()).collect::<std::result::Result<Vec<_>, _>>()?;
            let start = StartRequest {
                machine_id: machine,
                secret,
                flow_preferences,
                provider,
                rights: rights.split(',').map(|r| r.trim().to_string()).filter(|r| !r.is_empty()).collect(),
            };
            let body = call(HttpRequest::post_json(format!("{endpoint}/machine/sessions"), &start))?;
            let started: StartResponse = serde_json::from_value(body.clone())?;
            if let Some(gnap4vp_consumer::DeliveryReceipt::Manual { qr_payload }) = &started.delivery {
                eprintln!("scan or paste into the wallet: {qr_payload}");
            }
            print(&body)
        }
        Command::Status { session, endpoint } => {
            print(&call(HttpRequest::get(format!("{endpoint}/machine/sessions/{session}")))?)
        }
        Command::Fetch { session, path, endpoint } => print(&call(HttpRequest::post_json(
            format!("{endpoint}/machine/sessions/{session}/fetch"),
            &FetchRequest { path },
        ))?),
    }
}

fn serve(config: PathBuf, bind: Option<String>) -> Result<()> {
    let config = ConsumerConfig::load(&config)?;
    let key_path = config.key_path.clone().ok_or("config needs key_path")?;
    let key = KeyPair::load(&key_path)?;
    let transport = Arc::new(HttpTransport::new());
    for (authority, addr) in &config.hosts {
        transport.route(authority, addr.parse::<SocketAddr>()?);
    }
    let deps = ConsumerDeps {
        client: Client::new("consumer", transport),
        clock: Arc::new(SystemClock),
        rng: RandomSource::from_os(),
        steps: StepLog::disabled(),
        key,
    };
    let bind = bind.or_else(|| config.bind.clone()).unwrap_or_else(|| "127.0.0.1:8081".into());
    let public = config.public_base.clone();
    let state = config.state_path.clone();
    let instance = Arc::new(ConsumerInstance::new(config, deps));
    if let Some(path) = state.filter(|p| p.exists()) {
        instance.load_state(&path)?;
    }
    let server = HttpServer::start(&bind, &public, instance)?;
    eprintln!("consumer: serving {public} on {}", server.addr());
    loop {
        std::thread::park();
    }
}
