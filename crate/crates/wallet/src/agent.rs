use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::Duration;

use gnap4vp_core::clock::Clock;
use gnap4vp_core::crypto::KeyPair;
use gnap4vp_core::model::{
    CallbackMessage, CallbackParams, ExchangeRequestObject, FlowId, InteractionResult, VpSubmission, VpSubmissionResult,
};
use gnap4vp_core::random::RandomSource;
use gnap4vp_core::transcript::StepLog;
use gnap4vp_core::transport::{Client, HttpRequest, HttpResponse};
use gnap4vp_core::vc::{
    build_presentation, check_selection, match_definition, Credential, CredentialStore, MatchOutcome, Selection,
};
use serde::{Deserialize, Serialize};

use crate::config::WalletConfig;
use crate::error::WalletError;
use crate::exchange::{parse_exchange_uri, WalletExchange, WalletMode, WalletStatus};

const ID_BYTES: usize = 12;

pub struct WalletDeps {
    pub client: Client,
    pub clock: Arc<dyn Clock>,
    pub rng: RandomSource,
    pub steps: StepLog,
}

/// One POST to a provider exchange endpoint, as sent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionRecord {
    pub local_id: String,
    /// Exchange status at the moment of sending.
    pub status_before: WalletStatus,
    pub selection: Option<Selection>,
    /// Credential ids inside the VP (empty for refusals).
    pub presented: Vec<String>,
    pub nonce: Option<String>,
    pub audience: Option<String>,
    pub refusal: Option<String>,
}

struct Slot {
    /// Serializes operations on one exchange; held across network calls.
    op: Mutex<()>,
    data: Mutex<WalletExchange>,
}

impl Slot {
    fn data(&self) -> MutexGuard<'_, WalletExchange> {
        self.data.lock().expect("exchange lock")
    }

    fn snapshot(&self) -> WalletExchange {
        self.data().clone()
    }
}

pub struct WalletAgent {
    config: WalletConfig,
    store: RwLock<CredentialStore>,
    key: KeyPair,
    deps: WalletDeps,
    exchanges: RwLock<BTreeMap<String, Arc<Slot>>>,
    submissions: Mutex<Vec<SubmissionRecord>>,
}

impl WalletAgent {
    pub fn new(
        config: WalletConfig,
        store: CredentialStore,
        key: KeyPair,
        deps: WalletDeps,
    ) -> Result<Self, WalletError> {
        if store.holder_did != config.holder_did {
            return Err(WalletError::Config(format!(
                "credential store belongs to {}, wallet holder is {}",
                store.holder_did, config.holder_did
            )));
        }
        Ok(Self {
            config,
            store: RwLock::new(store),
            key,
            deps,
            exchanges: RwLock::new(BTreeMap::new()),
            submissions: Mutex::new(Vec::new()),
        })
    }

    pub fn config(&self) -> &WalletConfig {
        &self.config
    }

    pub fn holder_did(&self) -> &str {
        &self.config.holder_did
    }

    pub fn credentials(&self) -> Vec<Credential> {
        self.store.read().expect("store lock").credentials.clone()
    }

    pub fn add_credential(&self, credential: Credential) -> Result<(), WalletError> {
        self.store.write().expect("store lock").add(credential).map_err(|e| WalletError::Config(e.to_string()))
    }

    pub fn remove_credential(&self, credential_id: &str) -> bool {
        let mut store = self.store.write().expect("store lock");
        let before = store.credentials.len();
        store.credentials.retain(|c| c.credential_id != credential_id);
        store.credentials.len() != before
    }

    pub fn exchange(&self, local_id: &str) -> Result<WalletExchange, WalletError> {
        Ok(self.slot(local_id)?.snapshot())
    }

    pub fn exchanges(&self, status: Option<WalletStatus>) -> Vec<WalletExchange> {
        let slots: Vec<Arc<Slot>> = self.exchanges.read().expect("exchanges lock").values().cloned().collect();
        slots.iter().map(|s| s.snapshot()).filter(|e| status.is_none_or(|st| e.status == st)).collect()
    }

    pub fn submissions(&self) -> Vec<SubmissionRecord> {
        self.submissions.lock().expect("submissions lock").clone()
    }

    fn slot(&self, local_id: &str) -> Result<Arc<Slot>, WalletError> {
        self.exchanges
            .read()
            .expect("exchanges lock")
            .get(local_id)
            .cloned()
            .ok_or_else(|| WalletError::UnknownExchange(local_id.to_string()))
    }

    fn step(&self, step: u8, note: impl Into<String>) {
        self.deps.steps.record(FlowId::WalletInteraction, step, "wallet", note, self.deps.clock.now());
    }

    /// Fetches the request object behind `uri` and either queues the exchange
    /// for approval (manual) or selects, submits and relays right away
    /// (automated). Downstream failures of the automated path show up in the
    /// returned exchange, not as an error.
    pub fn ingest(&self, uri: &str, mode: WalletMode) -> Result<WalletExchange, WalletError> {
        parse_exchange_uri(uri)?;
        self.step(6, "exchange endpoint read; requesting the presentation definition");
        let resp = self.deps.client.send(HttpRequest::get(uri)).map_err(|e| WalletError::FetchFailed(e.to_string()))?;
        if !resp.is_success() {
            return Err(WalletError::FetchFailed(resp.error_body().label().to_string()));
        }
        let object: ExchangeRequestObject = resp.parse().map_err(WalletError::FetchFailed)?;

        let local_id = self.deps.rng.token(ID_BYTES);
        let mut ex = WalletExchange::new(local_id.clone(), uri.to_string(), mode);
        ex.definition = Some(object.definition.clone());
        ex.server_nonce = Some(object.server_nonce);
        ex.audience = Some(object.audience);
        let slot = Arc::new(Slot { op: Mutex::new(()), data: Mutex::new(ex) });
        let _op = slot.op.lock().expect("op lock");
        self.exchanges.write().expect("exchanges lock").insert(local_id, Arc::clone(&slot));

        match mode {
            WalletMode::Manual => slot.data().set(WalletStatus::AwaitingApproval),
            WalletMode::Automated => match match_definition(&object.definition, &self.credentials()) {
                MatchOutcome::Selected(selection) => {
                    {
                        let mut ex = slot.data();
                        ex.selection = Some(selection);
                        ex.set(WalletStatus::Approved);
                    }
                    self.step(8, "credentials selected without human intervention");
                    let _ = self.submit_locked(&slot);
                }
                MatchOutcome::NoMatch(_) => self.refuse_locked(&slot, "NoMatchingCredential"),
            },
        }
        Ok(slot.snapshot())
    }

    /// Records a human selection and proceeds to submission.
    pub fn approve(&self, local_id: &str, chosen: Selection) -> Result<WalletExchange, WalletError> {
        let slot = self.slot(local_id)?;
        let _op = slot.op.lock().expect("op lock");
        {
            let mut ex = slot.data();
            if ex.status != WalletStatus::AwaitingApproval {
                return Err(WalletError::WrongState(ex.status));
            }
            let definition = ex.definition.as_ref().expect("queued exchanges carry a definition");
            check_selection(definition, &self.credentials(), &chosen).map_err(WalletError::SelectionInvalid)?;
            ex.selection = Some(chosen);
            ex.set(WalletStatus::Approved);
        }
        self.step(8, "credentials reviewed and approved by the holder");
        let _ = self.submit_locked(&slot);
        Ok(slot.snapshot())
    }

    /// Refuses a queued exchange; the provider's denied result is relayed.
    pub fn deny(&self, local_id: &str) -> Result<WalletExchange, WalletError> {
        let slot = self.slot(local_id)?;
        let _op = slot.op.lock().expect("op lock");
        {
            let ex = slot.data();
            if ex.status != WalletStatus::AwaitingApproval {
                return Err(WalletError::WrongState(ex.status));
            }
        }
        self.refuse_locked(&slot, "UserDenied");
        Ok(slot.snapshot())
    }

    /// Submits an approved exchange and relays the result. On a submitted
    /// exchange whose relay failed earlier, retries only the relay.
    pub fn submit_and_relay(&self, local_id: &str) -> Result<WalletExchange, WalletError> {
        let slot = self.slot(local_id)?;
        let _op = slot.op.lock().expect("op lock");
        let status = slot.data().status;
        match status {
            WalletStatus::Approved => self.submit_locked(&slot)?,
            WalletStatus::Submitted => self.relay_locked(&slot)?,
            other => return Err(WalletError::WrongState(other)),
        }
        Ok(slot.snapshot())
    }

    fn submit_locked(&self, slot: &Slot) -> Result<(), WalletError> {
        let ex = slot.snapshot();
        let selection = ex.selection.clone().expect("approved exchanges carry a selection");
        let ids: BTreeSet<&String> = selection.values().collect();
        let held: Result<Vec<Credential>, String> = {
            let store = self.store.read().expect("store lock");
            ids.iter()
                .map(|id| store.get(id).cloned().ok_or_else(|| format!("credential {id} no longer held")))
                .collect()
        };
        let vp = held.and_then(|creds| {
            build_presentation(
                &self.key,
                &self.config.holder_did,
                &creds,
                ex.audience.as_deref(),
                ex.server_nonce.as_deref(),
            )
            .map_err(|e| e.to_string())
        });
        let vp = match vp {
            Ok(vp) => vp,
            Err(reason) => {
                slot.data().fail("SubmitFailed");
                return Err(WalletError::SubmitFailed(reason));
            }
        };
        self.submissions.lock().expect("submissions lock").push(SubmissionRecord {
            local_id: ex.local_id.clone(),
            status_before: ex.status,
            selection: Some(selection),
            presented: vp.credentials.iter().map(|c| c.credential_id.clone()).collect(),
            nonce: vp.nonce.clone(),
            audience: vp.audience.clone(),
            refusal: None,
        });
        self.step(9, "VP token built and sent to the exchange endpoint");
        let result = match self.post_submission(&ex.vp_exchange_uri, &VpSubmission::Presentation { vp_token: vp }) {
            Ok(r) => r,
            Err(reason) => {
                slot.data().fail("SubmitFailed");
                return Err(WalletError::SubmitFailed(reason));
            }
        };
        {
            let mut ex = slot.data();
            ex.result = Some(result);
            ex.set(WalletStatus::Submitted);
        }
        self.relay_locked(slot)
    }

    fn refuse_locked(&self, slot: &Slot, reason: &str) {
        let ex = slot.snapshot();
        self.submissions.lock().expect("submissions lock").push(SubmissionRecord {
            local_id: ex.local_id.clone(),
            status_before: ex.status,
            selection: None,
            presented: Vec::new(),
            nonce: None,
            audience: None,
            refusal: Some(reason.to_string()),
        });
        let refusal = VpSubmission::Refusal { error: reason.to_string() };
        if let Ok(result) = self.post_submission(&ex.vp_exchange_uri, &refusal) {
            slot.data().result = Some(result);
            let _ = self.relay_locked(slot);
        }
        slot.data().fail(reason);
    }

    fn post_submission(&self, uri: &str, body: &VpSubmission) -> Result<VpSubmissionResult, String> {
        let resp = self.deps.client.send(HttpRequest::post_json(uri, body)).map_err(|e| e.to_string())?;
        if !resp.is_success() {
            return Err(resp.error_body().label().to_string());
        }
        resp.parse()
    }

    fn relay_locked(&self, slot: &Slot) -> Result<(), WalletError> {
        let ex = slot.snapshot();
        let result = ex.result.clone().expect("relay follows a provider result");
        let message = match (result.result, result.interaction_ref, result.interaction_hash) {
            (InteractionResult::Authorized, Some(interaction_ref), Some(interaction_hash)) => {
                CallbackMessage::Authorized(CallbackParams { interaction_ref, interaction_hash })
            }
            _ => CallbackMessage::Denied { result: InteractionResult::Denied },
        };
        let (request, attempts) = match ex.mode {
            WalletMode::Manual => {
                let url = redirect_url(&result.callback_uri, &message).map_err(|reason| {
                    slot.data().failure = Some("RelayFailed".into());
                    WalletError::RelayFailed { attempts: 0, reason }
                })?;
                slot.data().redirect_url = Some(url.clone());
                (HttpRequest::get(url), 1)
            }
            WalletMode::Automated => {
                (HttpRequest::post_json(&result.callback_uri, &message), self.config.relay_attempts.max(1))
            }
        };
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                self.deps.clock.sleep(Duration::from_secs(self.config.relay_spacing_secs));
            }
            slot.data().relay_attempts += 1;
            match self.deps.client.send(request.clone()) {
                Ok(resp) => {
                    self.step(11, format!("result relayed to the consumer callback ({})", reply_label(&resp)));
                    let mut ex = slot.data();
                    ex.failure = None;
                    if ex.status == WalletStatus::Submitted {
                        ex.set(WalletStatus::Relayed);
                    }
                    return Ok(());
                }
                Err(e) => last = e.to_string(),
            }
        }
        let total = {
            let mut ex = slot.data();
            ex.failure = Some("RelayFailed".into());
            ex.relay_attempts
        };
        Err(WalletError::RelayFailed { attempts: total, reason: last })
    }
}

fn reply_label(resp: &HttpResponse) -> String {
    if resp.is_success() {
        "accepted".into()
    } else {
        format!("consumer answered {}", resp.error_body().label())
    }
}

/// The callback URL with the result appended as query parameters.
fn redirect_url(callback_uri: &str, message: &CallbackMessage) -> Result<String, String> {
    let mut url = url::Url::parse(callback_uri).map_err(|e| format!("callback uri: {e}"))?;
    {
        let mut q = url.query_pairs_mut();
        match message {
            CallbackMessage::Authorized(p) => {
                q.append_pair("interaction_ref", &p.interaction_ref);
                q.append_pair("hash", &p.interaction_hash);
            }
            CallbackMessage::Denied { .. } => {
                q.append_pair("result", "denied");
            }
        }
    }
    Ok(url.into())
}
