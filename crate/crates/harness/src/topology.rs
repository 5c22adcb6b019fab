//! Wires every role onto one recorded transport: in-process loopback or real
//! HTTP servers on ephemeral local ports.

use std::collections::BTreeMap;
use std::sync::Arc;

use gnap4vp_consumer::{
    ConsumerConfig, ConsumerDeps, ConsumerInstance, DeliveryMode, DeliveryReceipt, FetchRequest, StartRequest,
    StartResponse,
};
use gnap4vp_core::clock::{Clock, ManualClock, OffsetClock};
use gnap4vp_core::did::DidResolver;
use gnap4vp_core::http::{HttpServer, HttpTransport};
use gnap4vp_core::model::{ErrorBody, FlowId, GrantResponse};
use gnap4vp_core::random::RandomSource;
use gnap4vp_core::transcript::{StepLog, Transcript};
use gnap4vp_core::transport::{
    authority_of, Client, HttpRequest, HttpResponse, LoopbackNetwork, RecordingTransport, Service, TrafficRecord,
    Transport,
};
use gnap4vp_core::vc::{InputDescriptor, Selection};
use gnap4vp_provider::{ProviderConfig, ProviderDeps, ProviderService, ResourceConfig, RightConfig, Ttls};
use gnap4vp_wallet::{
    ApproveRequest, IngestRequest, WalletAgent, WalletConfig, WalletDeps, WalletExchange, WalletMode,
};
use serde::{Deserialize, Serialize};

use crate::fixtures::*;

pub const MACHINE_ID: &str = "machine-1";
pub const MACHINE_SECRET: &str = "machine-secret";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    Loopback,
    Http,
}

impl std::str::FromStr for TransportKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "loopback" => Ok(Self::Loopback),
            "http" => Ok(Self::Http),
            other => Err(format!("unknown transport {other} (loopback|http)")),
        }
    }
}

/// Which key the consumer instance signs with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsumerKey {
    Honest,
    /// The attacker key under the consumer's key id.
    Swapped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub provider_flows: Vec<FlowId>,
    pub consumer_mode: DeliveryMode,
    pub trust_issuer: bool,
    pub consumer_key: ConsumerKey,
    /// Seconds the consumer's clock runs ahead of everyone else's.
    pub consumer_clock_offset: i64,
}

impl Default for Topology {
    fn default() -> Self {
        Self {
            provider_flows: vec![FlowId::WalletInteraction, FlowId::LvpAuthorization],
            consumer_mode: DeliveryMode::Automated,
            trust_issuer: true,
            consumer_key: ConsumerKey::Honest,
            consumer_clock_offset: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot start {role} server: {source}")]
    Bind { role: &'static str, source: std::io::Error },
}

pub fn provider_config(flows: &[FlowId]) -> ProviderConfig {
    ProviderConfig {
        public_base: PROVIDER_ORIGIN.into(),
        as_id: None,
        supported_flows: flows.to_vec(),
        rights: BTreeMap::from([(
            RIGHT.to_string(),
            RightConfig { descriptors: vec![InputDescriptor::new("membership", MEMBERSHIP_TYPE, &[MEMBERSHIP_CLAIM])] },
        )]),
        resources: BTreeMap::from([(
            RESOURCE_PATH.to_string(),
            ResourceConfig { right: RIGHT.into(), payload: resource_payload() },
        )]),
        registry_path: None,
        snapshot_path: None,
        ttl: Ttls::default(),
        bind: None,
        hosts: BTreeMap::new(),
    }
}

/// All roles of one run plus the observation points.
pub struct Deployment {
    pub topology: Topology,
    pub seed: u64,
    pub ids: Identities,
    pub clock: Arc<ManualClock>,
    pub consumer_clock: Arc<OffsetClock>,
    pub transcript: Arc<Transcript>,
    pub traffic: Arc<RecordingTransport>,
    pub provider: Arc<ProviderService>,
    pub consumer: Arc<ConsumerInstance>,
    pub wallet: Arc<WalletAgent>,
    pub machine: Client,
    pub human: Client,
    pub attacker: Client,
    pub attacker_rng: RandomSource,
    _servers: Vec<HttpServer>,
}

impl Deployment {
    pub fn build(topology: Topology, transport: TransportKind, seed: u64) -> Result<Self, ScenarioError> {
        let ids = Identities::generate(seed);
        let clock = Arc::new(ManualClock::new(T0));
        let consumer_clock = Arc::new(OffsetClock::new(clock.clone(), topology.consumer_clock_offset));
        let transcript = Arc::new(Transcript::new());
        let loopback = Arc::new(LoopbackNetwork::new());
        let http = Arc::new(HttpTransport::new());
        let inner: Arc<dyn Transport> = match transport {
            TransportKind::Loopback => loopback.clone(),
            TransportKind::Http => http.clone(),
        };
        let traffic = Arc::new(RecordingTransport::new(inner));
        let client = |origin: &str| Client::new(origin, traffic.clone());
        let rng = |role: &str| RandomSource::seeded(seed, role);

        let provider_client = Arc::new(client("provider"));
        let provider = Arc::new(ProviderService::new(
            provider_config(&topology.provider_flows),
            ids.registry(topology.trust_issuer),
            ProviderDeps {
                resolver: Arc::new(DidResolver::new(provider_client.clone(), clock.clone())),
                fetcher: provider_client,
                clock: clock.clone(),
                rng: rng("provider"),
                steps: StepLog::new(transcript.clone()),
            },
        ));

        let consumer_key = match topology.consumer_key {
            ConsumerKey::Honest => ids.consumer_key.clone(),
            ConsumerKey::Swapped => ids.attacker_key.clone(),
        };
        let consumer = Arc::new(ConsumerInstance::new(
            ConsumerConfig {
                did: CONSUMER_DID.into(),
                public_base: CONSUMER_ORIGIN.into(),
                key_path: None,
                wallet_endpoint: Some(WALLET_ORIGIN.into()),
                mode: topology.consumer_mode,
                metadata_window_secs: 120,
                machine_secrets: BTreeMap::from([(MACHINE_ID.to_string(), MACHINE_SECRET.to_string())]),
                state_path: None,
                bind: None,
                hosts: BTreeMap::new(),
            },
            ConsumerDeps {
                client: client("consumer"),
                clock: consumer_clock.clone(),
                rng: rng("consumer"),
                steps: StepLog::new(transcript.clone()),
                key: consumer_key,
            },
        ));

        let wallet = Arc::new(
            WalletAgent::new(
                WalletConfig::new(CONSUMER_DID),
                ids.wallet_store(),
                ids.consumer_key.clone(),
                WalletDeps {
                    client: client("wallet"),
                    clock: clock.clone(),
                    rng: rng("wallet"),
                    steps: StepLog::new(transcript.clone()),
                },
            )
            .expect("store matches holder"),
        );

        let consumer_svc: Arc<dyn Service> = consumer.clone();
        let hosts: Vec<(&'static str, &'static str, Arc<dyn Service>)> = vec![
            ("provider", PROVIDER_AUTHORITY, provider.clone()),
            (
                "consumer",
                CONSUMER_AUTHORITY,
                Arc::new(
                    consumer_web_host(&ids).route("/callback", consumer_svc.clone()).route("/machine", consumer_svc),
                ),
            ),
            ("wallet", WALLET_AUTHORITY, wallet.clone()),
            ("issuer", ISSUER_AUTHORITY, Arc::new(issuer_web_host(&ids))),
        ];
        let mut servers = Vec::new();
        for (role, authority, svc) in hosts {
            match transport {
                TransportKind::Loopback => loopback.mount(authority, svc),
                TransportKind::Http => {
                    let server = HttpServer::start("127.0.0.1:0", &format!("https://{authority}"), svc)
                        .map_err(|source| ScenarioError::Bind { role, source })?;
                    http.route(authority, server.addr());
                    servers.push(server);
                }
            }
        }

        Ok(Self {
            topology,
            seed,
            machine: client("machine"),
            human: client("human"),
            attacker: client("attacker"),
            attacker_rng: rng("attacker"),
            ids,
            clock,
            consumer_clock,
            transcript,
            traffic,
            provider,
            consumer,
            wallet,
            _servers: servers,
        })
    }

    pub fn now(&self) -> i64 {
        self.clock.now()
    }

    /// Steps 1-5 from the machine side: `POST /machine/sessions`.
    pub fn machine_start(&self, preferences: &[FlowId]) -> Result<StartResponse, ErrorBody> {
        let start = StartRequest {
            machine_id: MACHINE_ID.into(),
            secret: MACHINE_SECRET.into(),
            flow_preferences: preferences.to_vec(),
            provider: PROVIDER_ORIGIN.into(),
            rights: vec![RIGHT.into()],
        };
        call(&self.machine, HttpRequest::post_json(format!("{CONSUMER_ORIGIN}/machine/sessions"), &start))
    }

    pub fn machine_fetch(&self, session_id: &str) -> Result<serde_json::Value, ErrorBody> {
        let body: serde_json::Value = call(
            &self.machine,
            HttpRequest::post_json(
                format!("{CONSUMER_ORIGIN}/machine/sessions/{session_id}/fetch"),
                &FetchRequest { path: RESOURCE_PATH.into() },
            ),
        )?;
        Ok(body["payload"].clone())
    }

    /// The person at the wallet pastes the QR payload.
    pub fn human_ingest(&self, qr_payload: &str) -> Result<WalletExchange, ErrorBody> {
        let body = IngestRequest { uri: qr_payload.to_string(), mode: WalletMode::Manual };
        call(&self.human, HttpRequest::post_json(format!("{WALLET_ORIGIN}/wallet/exchanges"), &body))
    }

    pub fn human_pending(&self) -> Result<Vec<WalletExchange>, ErrorBody> {
        call(&self.human, HttpRequest::get(format!("{WALLET_ORIGIN}/wallet/exchanges?status=awaiting_approval")))
    }

    pub fn human_approve(&self, local_id: &str, selection: Selection) -> Result<WalletExchange, ErrorBody> {
        call(
            &self.human,
            HttpRequest::post_json(
                format!("{WALLET_ORIGIN}/wallet/exchanges/{local_id}/approve"),
                &ApproveRequest { selection },
            ),
        )
    }

    pub fn membership_selection(&self) -> Selection {
        Selection::from([("membership".to_string(), self.ids.membership.credential_id.clone())])
    }

    /// Traffic matching origin, method and path prefix, oldest first.
    pub fn sent(&self, origin: &str, method: &str, path_prefix: &str) -> Vec<TrafficRecord> {
        self.traffic
            .records()
            .into_iter()
            .filter(|r| r.origin == origin && r.method == method && r.request.path().starts_with(path_prefix))
            .collect()
    }

    /// The grant response the consumer received last, read off the wire.
    pub fn observed_grant_response(&self) -> Option<GrantResponse> {
        self.sent("consumer", "POST", "/gnap/grant").last().and_then(|r| serde_json::from_slice(&r.response_body).ok())
    }

    pub fn qr_payload(start: &StartResponse) -> Option<&str> {
        match &start.delivery {
            Some(DeliveryReceipt::Manual { qr_payload }) => Some(qr_payload),
            _ => None,
        }
    }

    pub fn contacted(&self, authority: &str) -> bool {
        self.traffic.records().iter().any(|r| authority_of(&r.url).is_ok_and(|a| a == authority))
    }
}

fn call<T: serde::de::DeserializeOwned>(client: &Client, req: HttpRequest) -> Result<T, ErrorBody> {
    let resp: HttpResponse =
        client.send(req).map_err(|e| ErrorBody::new("TransportError").with_description(e.to_string()))?;
    if !resp.is_success() {
        return Err(resp.error_body());
    }
    resp.parse().map_err(|e| ErrorBody::new("Malformed").with_description(e))
}
