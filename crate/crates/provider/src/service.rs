use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use gnap4vp_core::clock::Clock;
use gnap4vp_core::crypto::{self, PossessionProof, PublicKey};
use gnap4vp_core::did::{find_lvp_endpoint, DocumentFetcher, FetchLimits, ResolveDid};
use gnap4vp_core::encoding::b64url;
use gnap4vp_core::model::{
    validate_grant_request, AccessRight, AccessToken, ContinueInfo, ExchangeRecord, ExchangeRequestObject,
    ExchangeStatus, FlowId, GrantRequest, GrantResponse, InteractInfo, InteractionResult, SignedClientMetadata,
    Timestamp, VpSubmission, VpSubmissionResult,
};
use gnap4vp_core::random::{RandomSource, TOKEN_BYTES};
use gnap4vp_core::transcript::StepLog;
use gnap4vp_core::vc::{
    match_definition, MatchOutcome, Presentation, PresentationChecks, PresentationDefinition, PresentationMode,
    SubjectClaims, TrustedIssuerRegistry, Verifier,
};
use serde::{Deserialize, Serialize};

use crate::config::ProviderConfig;
use crate::error::{LvpRejection, ProviderError, ResourceRejection};
use crate::grant::{GrantEvent, GrantRecord, GrantStatus, Provenance, TokenRecord};
use crate::replay::{ReplayGuard, ReplayGuardEntry};

const ACTOR: &str = "provider";
const ID_BYTES: usize = 16;

/// Test hooks: each flag switches off one security check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Defenses {
    pub replay_guard: bool,
    pub metadata_window: bool,
    pub metadata_audience: bool,
    pub metadata_signature: bool,
    pub possession_proof: bool,
    pub continuation_proof: bool,
    pub interaction_ref: bool,
    pub presentation: PresentationChecks,
}

impl Default for Defenses {
    fn default() -> Self {
        Self {
            replay_guard: true,
            metadata_window: true,
            metadata_audience: true,
            metadata_signature: true,
            possession_proof: true,
            continuation_proof: true,
            interaction_ref: true,
            presentation: PresentationChecks::default(),
        }
    }
}

pub struct ProviderDeps {
    pub resolver: Arc<dyn ResolveDid>,
    /// Used to fetch linked presentations.
    pub fetcher: Arc<dyn DocumentFetcher>,
    pub clock: Arc<dyn Clock>,
    pub rng: RandomSource,
    pub steps: StepLog,
}

/// One accepted presentation; every issued token must point at one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Acceptance {
    pub grant_id: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct State {
    grants: BTreeMap<String, GrantRecord>,
    exchanges: BTreeMap<String, ExchangeRecord>,
    /// Keyed by token value.
    tokens: BTreeMap<String, TokenRecord>,
    acceptances: Vec<Acceptance>,
}

/// Everything the provider persists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    grants: BTreeMap<String, GrantRecord>,
    exchanges: BTreeMap<String, ExchangeRecord>,
    tokens: BTreeMap<String, TokenRecord>,
    acceptances: Vec<Acceptance>,
    replay_guard: Vec<ReplayGuardEntry>,
}

/// A Continue Request as received.
#[derive(Debug, Clone)]
pub struct ContinueCall<'a> {
    pub grant_id: &'a str,
    pub continuation_token: &'a str,
    pub interact_ref: &'a str,
    pub proof: Option<PossessionProof>,
    pub method: &'a str,
    pub uri: &'a str,
    pub body: &'a [u8],
}

/// A protected-resource call as received.
#[derive(Debug, Clone)]
pub struct ResourceCall<'a> {
    pub path: &'a str,
    pub token: Option<&'a str>,
    pub proof: Option<PossessionProof>,
    pub method: &'a str,
    pub uri: &'a str,
    pub body: &'a [u8],
}

#[derive(Debug, Clone)]
pub struct LvpAccept {
    pub claims: SubjectClaims,
    pub consumer_key: PublicKey,
    pub metadata_digest: String,
}

pub struct ProviderService {
    config: ProviderConfig,
    registry: TrustedIssuerRegistry,
    deps: ProviderDeps,
    defenses: RwLock<Defenses>,
    state: Mutex<State>,
    replay: ReplayGuard,
}

impl std::fmt::Debug for ProviderService {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProviderService").field("as_id", &self.config.as_id()).finish_non_exhaustive()
    }
}

fn token_id(value: &str) -> String {
    b64url(&crypto::sha256(value.as_bytes())[..12])
}

fn labels(rights: &[AccessRight]) -> Vec<&str> {
    rights.iter().map(|r| r.label.as_str()).collect()
}

fn satisfies(definition: &PresentationDefinition, p: &Presentation) -> bool {
    matches!(match_definition(definition, &p.credentials), MatchOutcome::Selected(_))
}

impl ProviderService {
    pub fn new(config: ProviderConfig, registry: TrustedIssuerRegistry, deps: ProviderDeps) -> Self {
        Self {
            config,
            registry,
            deps,
            defenses: RwLock::new(Defenses::default()),
            state: Mutex::new(State::default()),
            replay: ReplayGuard::new(),
        }
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    pub fn defenses(&self) -> Defenses {
        *self.defenses.read().expect("defenses lock")
    }

    pub fn set_defenses(&self, defenses: Defenses) {
        *self.defenses.write().expect("defenses lock") = defenses;
    }

    fn now(&self) -> Timestamp {
        self.deps.clock.now()
    }

    fn state(&self) -> MutexGuard<'_, State> {
        self.state.lock().expect("provider state lock")
    }

    fn step(&self, flow: FlowId, step: u8, note: impl Into<String>) {
        self.deps.steps.record(flow, step, ACTOR, note, self.now());
    }

    pub fn handle_grant(&self, req: &GrantRequest) -> Result<GrantResponse, ProviderError> {
        let report = validate_grant_request(req);
        if !report.is_ok() {
            return Err(ProviderError::InvalidRequest(report.violations.into_iter().map(|v| v.0).collect()));
        }
        let definition = self
            .config
            .definition_for(&labels(&req.access))
            .map_err(|unknown| ProviderError::InvalidRequest(vec![format!("unknown rights: {}", unknown.join(","))]))?;
        let flow = req
            .flow_preferences
            .iter()
            .copied()
            .find(|f| self.config.supports(*f))
            .ok_or(ProviderError::FlowNotSupported)?;
        match flow {
            FlowId::WalletInteraction => Ok(self.start_wallet_grant(req, definition)),
            FlowId::LvpAuthorization => self.lvp_grant(req, &definition),
        }
    }

    fn start_wallet_grant(&self, req: &GrantRequest, definition: PresentationDefinition) -> GrantResponse {
        let now = self.now();
        let rng = &self.deps.rng;
        let grant_id = rng.token(ID_BYTES);
        let exchange_id = rng.token(ID_BYTES);
        let server_nonce = rng.nonce();
        let continuation_token = rng.token(TOKEN_BYTES);
        let base = self.config.base();
        let response = GrantResponse {
            selected_flow: FlowId::WalletInteraction,
            continue_info: Some(ContinueInfo {
                uri: format!("{base}/gnap/continue/{grant_id}"),
                continuation_token: continuation_token.clone(),
                wait_seconds: self.config.ttl.wait_secs,
            }),
            interact_info: Some(InteractInfo {
                vp_exchange_uri: format!("{base}/vp/exchange/{exchange_id}"),
                server_nonce: server_nonce.clone(),
            }),
            access_token: None,
            subject_info: None,
        };
        let mut state = self.state();
        state.exchanges.insert(
            exchange_id.clone(),
            ExchangeRecord {
                exchange_id: exchange_id.clone(),
                grant_id: grant_id.clone(),
                definition,
                server_nonce,
                status: ExchangeStatus::Pending,
                interaction_ref: None,
                created_at: now,
            },
        );
        state.grants.insert(
            grant_id.clone(),
            GrantRecord {
                grant_id,
                request: req.clone(),
                selected_flow: FlowId::WalletInteraction,
                status: GrantStatus::PendingInteraction,
                continuation_token: Some(continuation_token),
                exchange_id: Some(exchange_id),
                issued_token_id: None,
                accepted_claims: None,
                created_at: now,
            },
        );
        drop(state);
        self.step(FlowId::WalletInteraction, 4, "grant response with VP exchange URI and continuation");
        response
    }

    fn lvp_grant(
        &self,
        req: &GrantRequest,
        definition: &PresentationDefinition,
    ) -> Result<GrantResponse, ProviderError> {
        let metadata = req.client.metadata.as_ref().ok_or_else(|| {
            ProviderError::InvalidRequest(vec!["client.metadata required for lvp_authorization".into()])
        })?;
        let accept = self.process_lvp(metadata, definition).map_err(ProviderError::Lvp)?;
        let now = self.now();
        let grant_id = self.deps.rng.token(ID_BYTES);
        let mut grant = GrantRecord {
            grant_id: grant_id.clone(),
            request: req.clone(),
            selected_flow: FlowId::LvpAuthorization,
            status: GrantStatus::PendingInteraction,
            continuation_token: None,
            exchange_id: None,
            issued_token_id: None,
            accepted_claims: Some(accept.claims.clone()),
            created_at: now,
        };
        let provenance = Provenance::Lvp { metadata_digest: accept.metadata_digest };
        let mut state = self.state();
        state.acceptances.push(Acceptance { grant_id: grant_id.clone(), provenance: provenance.clone() });
        let token = self.issue_token(&mut state, &mut grant, GrantEvent::LvpAccepted, accept.consumer_key, provenance);
        state.grants.insert(grant_id, grant);
        drop(state);
        self.step(FlowId::LvpAuthorization, 8, "access token issued");
        Ok(GrantResponse {
            selected_flow: FlowId::LvpAuthorization,
            continue_info: None,
            interact_info: None,
            access_token: Some(token),
            subject_info: Some(accept.claims),
        })
    }

    fn issue_token(
        &self,
        state: &mut State,
        grant: &mut GrantRecord,
        event: GrantEvent,
        bound_key: PublicKey,
        provenance: Provenance,
    ) -> AccessToken {
        let token = AccessToken {
            value: self.deps.rng.token(TOKEN_BYTES),
            bound_key,
            rights: grant.request.access.clone(),
            expires_at: self.now() + self.config.ttl.token_secs,
        };
        let id = token_id(&token.value);
        grant.apply(event).expect("caller checked the grant state");
        grant.issued_token_id = Some(id.clone());
        grant.continuation_token = None;
        state.tokens.insert(
            token.value.clone(),
            TokenRecord {
                token_id: id,
                grant_id: grant.grant_id.clone(),
                flow: grant.selected_flow,
                token: token.clone(),
                provenance,
            },
        );
        token
    }

    /// Validates signed client metadata and the consumer's linked presentation.
    pub fn process_lvp(
        &self,
        metadata: &SignedClientMetadata,
        definition: &PresentationDefinition,
    ) -> Result<LvpAccept, LvpRejection> {
        use LvpRejection::*;
        let flow = FlowId::LvpAuthorization;
        let d = self.defenses();
        let now = self.now();
        let m = &metadata.metadata;
        if d.metadata_window
            && (now < m.valid_from
                || now > m.valid_until
                || m.valid_until - m.valid_from > self.config.ttl.max_metadata_window_secs)
        {
            return Err(WindowViolation);
        }
        if d.metadata_audience && m.audience != self.config.as_id() {
            return Err(AudienceMismatch);
        }
        let digest = b64url(&metadata.digest());
        if d.replay_guard && !self.replay.check_and_insert(&digest, m.valid_until, now) {
            return Err(Replay);
        }

        let doc = self.deps.resolver.resolve(&m.did).map_err(|_| FetchFailed)?;
        self.step(flow, 4, format!("resolved {}", m.did));
        let key = doc.key(&m.key_id).ok_or(BadSignature)?;
        if d.metadata_signature && !metadata.verify(key) {
            return Err(BadSignature);
        }
        let endpoint = find_lvp_endpoint(&doc).map_err(|_| NoLvpService)?;
        self.step(flow, 5, "metadata signature verified; LVP endpoint discovered");

        let body = self.deps.fetcher.fetch(endpoint, &FetchLimits::default()).map_err(|_| FetchFailed)?;
        let presentation: gnap4vp_core::vc::Presentation = serde_json::from_slice(&body).map_err(|_| FetchFailed)?;
        self.step(flow, 6, "linked presentation retrieved");

        if presentation.holder_did != m.did {
            return Err(HolderMismatch);
        }
        let verifier =
            Verifier { registry: &self.registry, resolver: self.deps.resolver.as_ref(), now, checks: d.presentation };
        let claims = verifier.validate(&presentation, PresentationMode::Linked, None, None).map_err(Presentation)?;
        if !satisfies(definition, &presentation) {
            return Err(DefinitionNotSatisfied);
        }
        self.step(flow, 7, "linked presentation validated");
        Ok(LvpAccept { claims, consumer_key: key.clone(), metadata_digest: digest })
    }

    /// Moves an overdue exchange (and its grant) to expired. Returns true if it did.
    fn expire_if_due(&self, state: &mut State, exchange_id: &str) -> bool {
        let now = self.now();
        let Some(ex) = state.exchanges.get_mut(exchange_id) else {
            return false;
        };
        if ex.status.is_terminal() || now - ex.created_at <= self.config.ttl.exchange_secs {
            return false;
        }
        let _ = ex.transition(ExchangeStatus::Expired);
        let grant_id = ex.grant_id.clone();
        if let Some(g) = state.grants.get_mut(&grant_id) {
            let _ = g.apply(GrantEvent::Expire);
        }
        true
    }

    pub fn get_presentation_definition(&self, exchange_id: &str) -> Result<ExchangeRequestObject, ProviderError> {
        let mut state = self.state();
        if !state.exchanges.contains_key(exchange_id) {
            return Err(ProviderError::UnknownExchange);
        }
        self.expire_if_due(&mut state, exchange_id);
        let ex = &state.exchanges[exchange_id];
        match ex.status {
            ExchangeStatus::Pending => {}
            ExchangeStatus::Expired => return Err(ProviderError::ExchangeExpired),
            _ => return Err(ProviderError::AlreadyTerminal),
        }
        let object = ExchangeRequestObject {
            definition: ex.definition.clone(),
            server_nonce: ex.server_nonce.clone(),
            audience: self.config.as_id().to_string(),
        };
        drop(state);
        self.step(FlowId::WalletInteraction, 7, "presentation definition served");
        Ok(object)
    }

    pub fn submit_vp(&self, exchange_id: &str, submission: &VpSubmission) -> Result<VpSubmissionResult, ProviderError> {
        let (definition, nonce, grant) = {
            let mut state = self.state();
            if !state.exchanges.contains_key(exchange_id) {
                return Err(ProviderError::UnknownExchange);
            }
            if self.expire_if_due(&mut state, exchange_id) {
                return Err(ProviderError::ExchangeExpired);
            }
            let ex = state.exchanges.get_mut(exchange_id).expect("checked above");
            match ex.status {
                ExchangeStatus::Pending => {}
                ExchangeStatus::Expired => return Err(ProviderError::ExchangeExpired),
                _ => return Err(ProviderError::AlreadyTerminal),
            }
            ex.transition(ExchangeStatus::Presented).expect("pending -> presented");
            let (definition, nonce, grant_id) = (ex.definition.clone(), ex.server_nonce.clone(), ex.grant_id.clone());
            (definition, nonce, state.grants[&grant_id].clone())
        };
        let interact = grant.request.interact.as_ref().expect("wallet grants carry interact");

        let verdict = match submission {
            VpSubmission::Refusal { error } => Err(error.clone()),
            VpSubmission::Presentation { vp_token } => self.check_session_vp(vp_token, &definition, &nonce, &grant),
        };

        let mut state = self.state();
        let ex = state.exchanges.get_mut(exchange_id).expect("exchanges are never removed");
        let result = match verdict {
            Ok(claims) => {
                let interaction_ref = self.deps.rng.token(ID_BYTES);
                let hash = crypto::interaction_hash(
                    &interact.client_nonce,
                    &nonce,
                    &interaction_ref,
                    &self.config.grant_endpoint(),
                )
                .expect("all hash inputs are non-empty");
                ex.transition(ExchangeStatus::Authorized).expect("presented -> authorized");
                ex.interaction_ref = Some(interaction_ref.clone());
                let g = state.grants.get_mut(&grant.grant_id).expect("grant exists");
                g.apply(GrantEvent::VpAccepted).map_err(ProviderError::WrongState)?;
                g.accepted_claims = Some(claims);
                state.acceptances.push(Acceptance {
                    grant_id: grant.grant_id.clone(),
                    provenance: Provenance::SessionBoundVp { exchange_id: exchange_id.to_string() },
                });
                VpSubmissionResult {
                    result: InteractionResult::Authorized,
                    callback_uri: interact.callback_uri.clone(),
                    interaction_ref: Some(interaction_ref),
                    interaction_hash: Some(hash),
                    reason: None,
                }
            }
            Err(reason) => {
                ex.transition(ExchangeStatus::Denied).expect("presented -> denied");
                if let Some(g) = state.grants.get_mut(&grant.grant_id) {
                    let _ = g.apply(GrantEvent::VpRejected);
                }
                VpSubmissionResult {
                    result: InteractionResult::Denied,
                    callback_uri: interact.callback_uri.clone(),
                    interaction_ref: None,
                    interaction_hash: None,
                    reason: Some(reason),
                }
            }
        };
        drop(state);
        let label = result.reason.as_deref().unwrap_or("authorized").to_string();
        self.step(FlowId::WalletInteraction, 10, format!("VP validated: {label}; callback URI returned"));
        Ok(result)
    }

    fn check_session_vp(
        &self,
        vp: &Presentation,
        definition: &PresentationDefinition,
        nonce: &str,
        grant: &GrantRecord,
    ) -> Result<SubjectClaims, String> {
        let d = self.defenses();
        let verifier = Verifier {
            registry: &self.registry,
            resolver: self.deps.resolver.as_ref(),
            now: self.now(),
            checks: d.presentation,
        };
        let claims = verifier
            .validate(vp, PresentationMode::SessionBound, Some(self.config.as_id()), Some(nonce))
            .map_err(|r| r.label().to_string())?;
        if vp.holder_did != grant.request.client.did {
            return Err(LvpRejection::HolderMismatch.label().into());
        }
        if !satisfies(definition, vp) {
            return Err(LvpRejection::DefinitionNotSatisfied.label().into());
        }
        Ok(claims)
    }

    pub fn continue_grant(&self, call: &ContinueCall<'_>) -> Result<GrantResponse, ProviderError> {
        let d = self.defenses();
        let now = self.now();
        let mut state = self.state();
        let grant = state.grants.get(call.grant_id).ok_or(ProviderError::UnknownGrant)?;
        if grant.continuation_token.as_deref() != Some(call.continuation_token) {
            return Err(ProviderError::BadContinuationToken);
        }
        if d.continuation_proof {
            let key = grant.request.client.key.as_ref().ok_or(ProviderError::BadContinuationToken)?;
            let proof =
                call.proof.as_ref().ok_or(ProviderError::BadContinuationProof(crypto::ProofRejection::BadSignature))?;
            crypto::verify_possession_proof(
                proof,
                call.method,
                call.uri,
                call.body,
                key,
                now,
                self.config.ttl.pop_skew_secs,
            )
            .map_err(ProviderError::BadContinuationProof)?;
        }
        if grant.status != GrantStatus::InteractionComplete {
            return Err(ProviderError::WrongState(grant.status));
        }
        let exchange_id = grant.exchange_id.clone().expect("wallet grants have an exchange");
        let stored_ref = state.exchanges.get(&exchange_id).and_then(|e| e.interaction_ref.clone());
        let mut grant = state.grants.remove(call.grant_id).expect("present");
        if d.interaction_ref && stored_ref.as_deref() != Some(call.interact_ref) {
            grant.continuation_token = None;
            let _ = grant.apply(GrantEvent::ContinueBadRef);
            state.grants.insert(grant.grant_id.clone(), grant);
            return Err(ProviderError::BadInteractionRef);
        }
        let key = grant.request.client.key.clone().expect("validated: wallet grants carry client.key");
        let token = self.issue_token(
            &mut state,
            &mut grant,
            GrantEvent::ContinueAccepted,
            key,
            Provenance::SessionBoundVp { exchange_id },
        );
        let subject_info = grant.accepted_claims.clone();
        state.grants.insert(grant.grant_id.clone(), grant);
        drop(state);
        self.step(FlowId::WalletInteraction, 13, "access token and subject information issued");
        Ok(GrantResponse {
            selected_flow: FlowId::WalletInteraction,
            continue_info: None,
            interact_info: None,
            access_token: Some(token),
            subject_info,
        })
    }

    pub fn serve_resource(&self, call: &ResourceCall<'_>) -> Result<serde_json::Value, ProviderError> {
        let resource = self.config.resources.get(call.path).ok_or(ProviderError::UnknownResource)?;
        let unauthorized = ProviderError::Unauthorized;
        let now = self.now();
        let record = {
            let state = self.state();
            let value = call.token.ok_or(unauthorized(ResourceRejection::UnknownToken))?;
            state.tokens.get(value).cloned().ok_or(unauthorized(ResourceRejection::UnknownToken))?
        };
        if now > record.token.expires_at {
            return Err(unauthorized(ResourceRejection::ExpiredToken));
        }
        if !record.token.rights.iter().any(|r| r.label == resource.right) {
            return Err(unauthorized(ResourceRejection::InsufficientRights));
        }
        if self.defenses().possession_proof {
            let proof = call.proof.as_ref().ok_or(unauthorized(crypto::ProofRejection::BadSignature.into()))?;
            crypto::verify_possession_proof(
                proof,
                call.method,
                call.uri,
                call.body,
                &record.token.bound_key,
                now,
                self.config.ttl.pop_skew_secs,
            )
            .map_err(|r| unauthorized(r.into()))?;
        }
        let step = match record.flow {
            FlowId::WalletInteraction => 15,
            FlowId::LvpAuthorization => 10,
        };
        self.step(record.flow, step, format!("token validated; {} served", call.path));
        Ok(resource.payload.clone())
    }

    pub fn grant(&self, grant_id: &str) -> Option<GrantRecord> {
        self.state().grants.get(grant_id).cloned()
    }

    pub fn grants(&self) -> Vec<GrantRecord> {
        self.state().grants.values().cloned().collect()
    }

    pub fn exchange(&self, exchange_id: &str) -> Option<ExchangeRecord> {
        self.state().exchanges.get(exchange_id).cloned()
    }

    pub fn exchanges(&self) -> Vec<ExchangeRecord> {
        self.state().exchanges.values().cloned().collect()
    }

    pub fn tokens(&self) -> Vec<TokenRecord> {
        self.state().tokens.values().cloned().collect()
    }

    pub fn acceptances(&self) -> Vec<Acceptance> {
        self.state().acceptances.clone()
    }

    pub fn replay_entries(&self) -> usize {
        self.replay.len()
    }

    /// Every issued token must trace back to an accepted presentation for its
    /// grant. Returns the offending token ids.
    pub fn audit_issuance(&self) -> Result<(), Vec<String>> {
        let state = self.state();
        let orphans: Vec<String> = state
            .tokens
            .values()
            .filter(|t| !state.acceptances.iter().any(|a| a.grant_id == t.grant_id && a.provenance == t.provenance))
            .map(|t| t.token_id.clone())
            .collect();
        if orphans.is_empty() {
            Ok(())
        } else {
            Err(orphans)
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        let state = self.state();
        Snapshot {
            grants: state.grants.clone(),
            exchanges: state.exchanges.clone(),
            tokens: state.tokens.clone(),
            acceptances: state.acceptances.clone(),
            replay_guard: self.replay.entries(),
        }
    }

    pub fn restore(&self, snapshot: Snapshot) {
        let mut state = self.state();
        *state = State {
            grants: snapshot.grants,
            exchanges: snapshot.exchanges,
            tokens: snapshot.tokens,
            acceptances: snapshot.acceptances,
        };
        self.replay.restore(snapshot.replay_guard);
    }

    pub fn save_snapshot(&self, path: &Path) -> std::io::Result<()> {
        let bytes = serde_json::to_vec_pretty(&self.snapshot()).map_err(std::io::Error::other)?;
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(tmp, path)
    }

    pub fn load_snapshot(&self, path: &Path) -> std::io::Result<()> {
        let bytes = std::fs::read(path)?;
        let snapshot: Snapshot = serde_json::from_slice(&bytes).map_err(std::io::Error::other)?;
        self.restore(snapshot);
        Ok(())
    }
}
