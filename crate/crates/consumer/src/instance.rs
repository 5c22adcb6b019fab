use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use gnap4vp_core::clock::Clock;
use gnap4vp_core::crypto::{self, KeyPair};
use gnap4vp_core::model::{
    AccessRight, CallbackMessage, ClientIdentity, ClientMetadata, ContinueRequest, FlowId, GrantRequest, GrantResponse,
    InteractionSpec, Timestamp,
};
use gnap4vp_core::random::RandomSource;
use gnap4vp_core::transcript::StepLog;
use gnap4vp_core::transport::{Client, HttpRequest, HttpResponse};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{ConsumerConfig, DeliveryMode};
use crate::error::ConsumerError;
use crate::session::{AbortReason, CallbackOutcome, ConsumerSession, DeliveryReceipt, SessionStatus};

const ACTOR: &str = "consumer";
pub const PROOF_HEADER: &str = "gnap-proof";

/// Test hooks for the consumer-side checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsumerDefenses {
    pub verify_callback_hash: bool,
}

impl Default for ConsumerDefenses {
    fn default() -> Self {
        Self { verify_callback_hash: true }
    }
}

pub struct ConsumerDeps {
    pub client: Client,
    pub clock: Arc<dyn Clock>,
    pub rng: RandomSource,
    pub steps: StepLog,
    pub key: KeyPair,
}

type Shared = Arc<Mutex<ConsumerSession>>;

pub struct ConsumerInstance {
    config: ConsumerConfig,
    deps: ConsumerDeps,
    defenses: RwLock<ConsumerDefenses>,
    sessions: RwLock<BTreeMap<String, Shared>>,
    continuations: AtomicUsize,
}

impl std::fmt::Debug for ConsumerInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConsumerInstance").field("did", &self.config.did).finish_non_exhaustive()
    }
}

fn wrong_state(s: &ConsumerSession) -> ConsumerError {
    ConsumerError::WrongState(s.status)
}

fn rejection(resp: &HttpResponse) -> String {
    resp.error_body().label().to_string()
}

fn transport(e: impl std::fmt::Display) -> ConsumerError {
    ConsumerError::Transport(e.to_string())
}

impl ConsumerInstance {
    pub fn new(config: ConsumerConfig, deps: ConsumerDeps) -> Self {
        Self {
            config,
            deps,
            defenses: RwLock::new(ConsumerDefenses::default()),
            sessions: RwLock::new(BTreeMap::new()),
            continuations: AtomicUsize::new(0),
        }
    }

    pub fn config(&self) -> &ConsumerConfig {
        &self.config
    }

    pub fn did(&self) -> &str {
        &self.config.did
    }

    pub fn public_key(&self) -> gnap4vp_core::crypto::PublicKey {
        self.deps.key.public_key()
    }

    pub fn defenses(&self) -> ConsumerDefenses {
        *self.defenses.read().expect("defenses lock")
    }

    pub fn set_defenses(&self, d: ConsumerDefenses) {
        *self.defenses.write().expect("defenses lock") = d;
    }

    /// Number of Continue Requests sent so far.
    pub fn continuations_sent(&self) -> usize {
        self.continuations.load(Ordering::SeqCst)
    }

    fn now(&self) -> Timestamp {
        self.deps.clock.now()
    }

    fn step(&self, flow: FlowId, step: u8, note: impl Into<String>) {
        self.deps.steps.record(flow, step, ACTOR, note, self.now());
    }

    fn steps_for(&self, prefs: &[FlowId], step: u8, note: &str) {
        for f in prefs {
            self.step(*f, step, note);
        }
    }

    fn shared(&self, session_id: &str) -> Result<Shared, ConsumerError> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(session_id)
            .cloned()
            .ok_or_else(|| ConsumerError::UnknownSession(session_id.to_string()))
    }

    pub fn session(&self, session_id: &str) -> Result<ConsumerSession, ConsumerError> {
        Ok(self.shared(session_id)?.lock().expect("session lock").clone())
    }

    pub fn sessions(&self) -> Vec<ConsumerSession> {
        self.sessions.read().expect("sessions lock").values().map(|s| s.lock().expect("session lock").clone()).collect()
    }

    /// Stub machine authentication: a shared secret per machine id.
    pub fn authenticate_machine(&self, machine_id: &str, secret: &str) -> Result<(), ConsumerError> {
        let ok = self.config.machine_secrets.is_empty()
            || self.config.machine_secrets.get(machine_id).is_some_and(|s| s == secret);
        if ok {
            Ok(())
        } else {
            Err(ConsumerError::MachineAuth(machine_id.to_string()))
        }
    }

    pub fn start_session(&self, machine_id: &str, flow: &str) -> Result<ConsumerSession, ConsumerError> {
        let flow: FlowId =
            flow.parse().map_err(|e: gnap4vp_core::model::UnknownFlow| ConsumerError::UnknownFlow(e.0))?;
        self.start_session_with_preferences(machine_id, &[flow])
    }

    pub fn start_session_with_preferences(
        &self,
        machine_id: &str,
        preferences: &[FlowId],
    ) -> Result<ConsumerSession, ConsumerError> {
        if preferences.is_empty() {
            return Err(ConsumerError::UnknownFlow(String::new()));
        }
        let wants_wallet = preferences.contains(&FlowId::WalletInteraction);
        let session = ConsumerSession {
            session_id: self.deps.rng.token(12),
            machine_id: machine_id.to_string(),
            flow_preferences: preferences.to_vec(),
            selected_flow: None,
            client_nonce: wants_wallet.then(|| self.deps.rng.nonce()),
            provider_uri: None,
            grant_endpoint_uri: None,
            rights: Vec::new(),
            continue_info: None,
            vp_exchange_uri: None,
            server_nonce: None,
            interaction_ref: None,
            access_token: None,
            subject_info: None,
            status: SessionStatus::Started,
            failure: None,
            created_at: self.now(),
        };
        self.sessions
            .write()
            .expect("sessions lock")
            .insert(session.session_id.clone(), Arc::new(Mutex::new(session.clone())));
        self.steps_for(preferences, 1, &format!("session started for {machine_id}"));
        Ok(session)
    }

    fn build_grant_request(&self, s: &ConsumerSession, provider_uri: &str) -> Result<GrantRequest, ConsumerError> {
        let wants_wallet = s.flow_preferences.contains(&FlowId::WalletInteraction);
        let wants_lvp = s.flow_preferences.contains(&FlowId::LvpAuthorization);
        let interact = wants_wallet.then(|| InteractionSpec {
            callback_uri: self.config.callback_uri(&s.session_id),
            callback_mode: self.config.mode.callback_mode(),
            client_nonce: s.client_nonce.clone().expect("wallet sessions carry a client nonce"),
        });
        let metadata = if wants_lvp {
            let now = self.now();
            let meta = ClientMetadata {
                valid_from: now,
                valid_until: now + self.config.metadata_window_secs,
                audience: provider_uri.to_string(),
                did: self.config.did.clone(),
                key_id: self.deps.key.key_id().to_string(),
            };
            Some(meta.sign(&self.deps.key).map_err(|e| ConsumerError::Config(e.to_string()))?)
        } else {
            None
        };
        Ok(GrantRequest {
            access: s.rights.clone(),
            client: ClientIdentity {
                did: self.config.did.clone(),
                key: wants_wallet.then(|| self.deps.key.public_key()),
                metadata,
                display_name: None,
            },
            interact,
            flow_preferences: s.flow_preferences.clone(),
        })
    }

    pub fn request_grant(
        &self,
        session_id: &str,
        provider_uri: &str,
        rights: &[AccessRight],
    ) -> Result<GrantResponse, ConsumerError> {
        let shared = self.shared(session_id)?;
        let mut s = shared.lock().expect("session lock");
        if s.status != SessionStatus::Started {
            return Err(wrong_state(&s));
        }
        let provider_uri = provider_uri.trim_end_matches('/');
        s.rights = rights.to_vec();
        s.provider_uri = Some(provider_uri.to_string());
        s.grant_endpoint_uri = Some(format!("{provider_uri}/gnap/grant"));
        let request = self.build_grant_request(&s, provider_uri)?;
        self.steps_for(&s.flow_preferences, 3, "grant request sent");
        let resp = self
            .deps
            .client
            .send(HttpRequest::post_json(s.grant_endpoint_uri.clone().expect("set above"), &request))
            .map_err(transport)?;
        if !resp.is_success() {
            let reason = rejection(&resp);
            s.status = SessionStatus::Failed;
            s.failure = Some(reason.clone());
            return Err(ConsumerError::ProviderRejected(reason));
        }
        let grant: GrantResponse = resp.parse().map_err(ConsumerError::Malformed)?;
        s.selected_flow = Some(grant.selected_flow);
        match grant.selected_flow {
            FlowId::WalletInteraction => {
                let (Some(interact), Some(cont)) = (&grant.interact_info, &grant.continue_info) else {
                    return Err(ConsumerError::Malformed("wallet grant response without interact/continue".into()));
                };
                s.vp_exchange_uri = Some(interact.vp_exchange_uri.clone());
                s.server_nonce = Some(interact.server_nonce.clone());
                s.continue_info = Some(cont.clone());
                s.status = SessionStatus::AwaitingWallet;
            }
            FlowId::LvpAuthorization => {
                let Some(token) = &grant.access_token else {
                    return Err(ConsumerError::Malformed("LVP grant response without token".into()));
                };
                s.access_token = Some(token.clone());
                s.subject_info = grant.subject_info.clone();
                s.status = SessionStatus::Continuing;
            }
        }
        Ok(grant)
    }

    /// Hands the VP Exchange URI to the wallet. The session lock is not held
    /// while pushing: an automated wallet calls back before the push returns.
    pub fn deliver_exchange_uri(&self, session_id: &str) -> Result<DeliveryReceipt, ConsumerError> {
        let uri = {
            let s = self.session(session_id)?;
            if s.status != SessionStatus::AwaitingWallet {
                return Err(ConsumerError::WrongState(s.status));
            }
            s.vp_exchange_uri.expect("awaiting_wallet sessions carry the exchange URI")
        };
        match self.config.mode {
            DeliveryMode::Manual => {
                self.step(FlowId::WalletInteraction, 5, "VP exchange URI emitted as QR payload");
                Ok(DeliveryReceipt::Manual { qr_payload: uri })
            }
            DeliveryMode::Automated => {
                let wallet = self.config.wallet_endpoint.as_deref().ok_or(ConsumerError::NoWallet)?;
                self.step(FlowId::WalletInteraction, 5, "VP exchange URI pushed to wallet");
                let req = HttpRequest::post_json(
                    format!("{}/wallet/exchanges", wallet.trim_end_matches('/')),
                    &json!({"uri": uri, "mode": "automated"}),
                );
                let resp = self.deps.client.send(req).map_err(transport)?;
                if !resp.is_success() {
                    return Err(ConsumerError::WalletRejected(rejection(&resp)));
                }
                let body: serde_json::Value = resp.parse().map_err(ConsumerError::Malformed)?;
                let exchange_id = body["local_id"]
                    .as_str()
                    .ok_or_else(|| ConsumerError::Malformed("wallet reply without local_id".into()))?;
                Ok(DeliveryReceipt::Pushed { exchange_id: exchange_id.to_string() })
            }
        }
    }

    pub fn handle_callback(&self, session_id: &str, message: &CallbackMessage) -> CallbackOutcome {
        let Ok(shared) = self.shared(session_id) else {
            return CallbackOutcome::Abort(AbortReason::WrongState);
        };
        let mut s = shared.lock().expect("session lock");
        if s.status != SessionStatus::AwaitingWallet {
            return CallbackOutcome::Abort(AbortReason::WrongState);
        }
        let params = match message {
            CallbackMessage::Authorized(p) => p,
            CallbackMessage::Denied { .. } => {
                s.status = SessionStatus::Failed;
                s.failure = Some("Denied".into());
                self.step(FlowId::WalletInteraction, 11, "callback carried a denied result");
                return CallbackOutcome::Abort(AbortReason::Denied);
            }
        };
        if params.interaction_ref.is_empty() || params.interaction_hash.is_empty() {
            s.status = SessionStatus::Failed;
            s.failure = Some("Malformed".into());
            return CallbackOutcome::Abort(AbortReason::Malformed);
        }
        if self.defenses().verify_callback_hash {
            let expected = crypto::interaction_hash(
                s.client_nonce.as_deref().unwrap_or_default(),
                s.server_nonce.as_deref().unwrap_or_default(),
                &params.interaction_ref,
                s.grant_endpoint_uri.as_deref().unwrap_or_default(),
            );
            if expected.as_deref() != Ok(params.interaction_hash.as_str()) {
                s.status = SessionStatus::Failed;
                s.failure = Some("HashMismatch".into());
                return CallbackOutcome::Abort(AbortReason::HashMismatch);
            }
        }
        s.interaction_ref = Some(params.interaction_ref.clone());
        s.status = SessionStatus::Continuing;
        self.step(FlowId::WalletInteraction, 11, "callback received; interaction hash verified");
        CallbackOutcome::Accept
    }

    fn continue_grant(&self, s: &mut ConsumerSession) -> Result<(), ConsumerError> {
        let cont = s.continue_info.clone().expect("wallet sessions carry continue_info");
        let interact_ref = s.interaction_ref.clone().expect("continuing wallet sessions carry interaction_ref");
        let body = serde_json::to_vec(&ContinueRequest { interact_ref }).expect("serializable");
        let proof = crypto::make_possession_proof("POST", &cont.uri, &body, &self.deps.key, self.now())
            .map_err(|e| ConsumerError::Config(e.to_string()))?;
        let req = HttpRequest::new("POST", cont.uri.clone())
            .header("content-type", "application/json")
            .header("authorization", format!("GNAP {}", cont.continuation_token))
            .header(PROOF_HEADER, proof.to_header())
            .body(body);
        self.continuations.fetch_add(1, Ordering::SeqCst);
        self.step(FlowId::WalletInteraction, 12, "continue request sent with interaction reference");
        let resp = self.deps.client.send(req).map_err(transport)?;
        if !resp.is_success() {
            let reason = rejection(&resp);
            s.status = SessionStatus::Failed;
            s.failure = Some(reason.clone());
            return Err(ConsumerError::ContinuationRejected(reason));
        }
        let grant: GrantResponse = resp.parse().map_err(ConsumerError::Malformed)?;
        s.access_token = grant.access_token;
        s.subject_info = grant.subject_info;
        s.continue_info = None;
        if s.access_token.is_none() {
            return Err(ConsumerError::Malformed("continue response without token".into()));
        }
        Ok(())
    }

    /// Continues the grant if needed, then calls `resource_path` with the
    /// token and a fresh possession proof.
    pub fn continue_and_fetch(
        &self,
        session_id: &str,
        resource_path: &str,
    ) -> Result<serde_json::Value, ConsumerError> {
        let shared = self.shared(session_id)?;
        let mut s = shared.lock().expect("session lock");
        if s.status != SessionStatus::Continuing {
            return Err(wrong_state(&s));
        }
        if s.access_token.is_none() {
            self.continue_grant(&mut s)?;
        }
        let token = s.access_token.clone().expect("set above");
        let flow = s.selected_flow.unwrap_or(FlowId::WalletInteraction);
        let url = format!("{}{resource_path}", s.provider_uri.as_deref().unwrap_or_default());
        let proof = crypto::make_possession_proof("GET", &url, b"", &self.deps.key, self.now())
            .map_err(|e| ConsumerError::Config(e.to_string()))?;
        let req = HttpRequest::get(url)
            .header("authorization", format!("GNAP {}", token.value))
            .header(PROOF_HEADER, proof.to_header());
        let step = if flow == FlowId::WalletInteraction { 14 } else { 9 };
        self.step(flow, step, format!("resource {resource_path} requested with token and proof"));
        let resp = self.deps.client.send(req).map_err(transport)?;
        if !resp.is_success() {
            let reason = rejection(&resp);
            s.status = SessionStatus::Failed;
            s.failure = Some(reason.clone());
            return Err(ConsumerError::ResourceUnauthorized(reason));
        }
        s.status = SessionStatus::Done;
        resp.parse().map_err(ConsumerError::Malformed)
    }

    pub fn save_state(&self, path: &Path) -> std::io::Result<()> {
        let bytes = serde_json::to_vec_pretty(&self.sessions()).map_err(std::io::Error::other)?;
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(tmp, path)
    }

    pub fn load_state(&self, path: &Path) -> std::io::Result<()> {
        let sessions: Vec<ConsumerSession> =
            serde_json::from_slice(&std::fs::read(path)?).map_err(std::io::Error::other)?;
        let mut map = self.sessions.write().expect("sessions lock");
        map.clear();
        map.extend(sessions.into_iter().map(|s| (s.session_id.clone(), Arc::new(Mutex::new(s)))));
        Ok(())
    }
}

/// Body of `POST /machine/sessions`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StartRequest {
    pub machine_id: String,
    #[serde(default)]
    pub secret: String,
    pub flow_preferences: Vec<FlowId>,
    pub provider: String,
    pub rights: Vec<String>,
}

impl ConsumerInstance {
    /// Steps 1-5 as one machine-facing call: authenticate, start, request the
    /// grant and hand over the VP Exchange URI when the wallet flow was selected.
    pub fn start_for_machine(
        &self,
        req: &StartRequest,
    ) -> Result<(ConsumerSession, Option<DeliveryReceipt>), ConsumerError> {
        self.authenticate_machine(&req.machine_id, &req.secret)?;
        let session = self.start_session_with_preferences(&req.machine_id, &req.flow_preferences)?;
        self.steps_for(&req.flow_preferences, 2, &format!("machine {} authenticated", req.machine_id));
        let rights: Vec<AccessRight> = req.rights.iter().map(|r| AccessRight::new(r.as_str(), &["read"])).collect();
        let grant = self.request_grant(&session.session_id, &req.provider, &rights)?;
        let receipt = match grant.selected_flow {
            FlowId::WalletInteraction => Some(self.deliver_exchange_uri(&session.session_id)?),
            FlowId::LvpAuthorization => None,
        };
        Ok((self.session(&session.session_id)?, receipt))
    }
}
