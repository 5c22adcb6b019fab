use gnap4vp_core::model::{AccessRight, AccessToken, ContinueInfo, FlowId, Timestamp};
use gnap4vp_core::vc::SubjectClaims;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Started,
    AwaitingWallet,
    Continuing,
    Done,
    Failed,
}

impl SessionStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, SessionStatus::Done | SessionStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsumerSession {
    pub session_id: String,
    pub machine_id: String,
    pub flow_preferences: Vec<FlowId>,
    /// Flow the provider selected; `None` before the grant response.
    pub selected_flow: Option<FlowId>,
    /// Present whenever the wallet flow is among the preferences.
    pub client_nonce: Option<String>,
    pub provider_uri: Option<String>,
    pub grant_endpoint_uri: Option<String>,
    pub rights: Vec<AccessRight>,
    pub continue_info: Option<ContinueInfo>,
    pub vp_exchange_uri: Option<String>,
    pub server_nonce: Option<String>,
    pub interaction_ref: Option<String>,
    pub access_token: Option<AccessToken>,
    pub subject_info: Option<SubjectClaims>,
    pub status: SessionStatus,
    /// Why the session failed.
    pub failure: Option<String>,
    pub created_at: Timestamp,
}

impl ConsumerSession {
    pub fn invariant_holds(&self) -> bool {
        self.status != SessionStatus::AwaitingWallet || (self.continue_info.is_some() && self.server_nonce.is_some())
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            session_id: self.session_id.clone(),
            status: self.status,
            selected_flow: self.selected_flow,
            vp_exchange_uri: self.vp_exchange_uri.clone(),
            failure: self.failure.clone(),
            subject_info: self.subject_info.clone(),
        }
    }
}

/// What the machine API reports about a session. Never includes tokens or nonces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub status: SessionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_flow: Option<FlowId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vp_exchange_uri: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_info: Option<SubjectClaims>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AbortReason {
    HashMismatch,
    WrongState,
    /// The wallet relayed a denied result.
    Denied,
    Malformed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CallbackOutcome {
    Accept,
    Abort(AbortReason),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DeliveryReceipt {
    /// The exact string to render as a QR code.
    Manual { qr_payload: String },
    /// The wallet's local id for the ingested exchange.
    Pushed { exchange_id: String },
}
