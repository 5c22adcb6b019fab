use gnap4vp_core::model::VpSubmissionResult;
use gnap4vp_core::vc::{PresentationDefinition, Selection};
use serde::{Deserialize, Serialize};

use crate::error::WalletError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalletMode {
    /// A human approves through the queue; the result goes back by redirect.
    Manual,
    /// Selection by `match_definition`; the result is pushed to the callback.
    Automated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalletStatus {
    Ingested,
    AwaitingApproval,
    Approved,
    Submitted,
    Relayed,
    Failed,
}

/// Body of `POST /wallet/exchanges`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestRequest {
    pub uri: String,
    pub mode: WalletMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalletExchange {
    pub local_id: String,
    pub vp_exchange_uri: String,
    pub mode: WalletMode,
    pub status: WalletStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definition: Option<PresentationDefinition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub server_nonce: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audience: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<Selection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<VpSubmissionResult>,
    /// Redirect target handed to the user agent (manual mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub redirect_url: Option<String>,
    pub relay_attempts: u32,
    pub history: Vec<WalletStatus>,
}

impl WalletExchange {
    pub(crate) fn new(local_id: String, vp_exchange_uri: String, mode: WalletMode) -> Self {
        Self {
            local_id,
            vp_exchange_uri,
            mode,
            status: WalletStatus::Ingested,
            failure: None,
            definition: None,
            server_nonce: None,
            audience: None,
            selection: None,
            result: None,
            redirect_url: None,
            relay_attempts: 0,
            history: vec![WalletStatus::Ingested],
        }
    }

    pub(crate) fn set(&mut self, status: WalletStatus) {
        self.status = status;
        self.history.push(status);
    }

    pub(crate) fn fail(&mut self, reason: impl Into<String>) {
        self.failure = Some(reason.into());
        self.set(WalletStatus::Failed);
    }

    /// Manual exchanges pass through the approval queue before any selection
    /// takes effect; automated ones never enter it.
    pub fn invariant_holds(&self) -> bool {
        let queued = self.history.iter().position(|s| *s == WalletStatus::AwaitingApproval);
        let approved = self.history.iter().position(|s| *s == WalletStatus::Approved);
        match self.mode {
            WalletMode::Automated => queued.is_none(),
            WalletMode::Manual => match (queued, approved) {
                (_, None) => true,
                (Some(q), Some(a)) => q < a,
                (None, Some(_)) => false,
            },
        }
    }
}

/// Splits `https://host/vp/exchange/{id}` into its origin and exchange id.
pub fn parse_exchange_uri(uri: &str) -> Result<(String, String), WalletError> {
    let bad = || WalletError::MalformedUri(uri.to_string());
    let parsed = url::Url::parse(uri).map_err(|_| bad())?;
    if parsed.scheme() != "https"
        || parsed.host_str().is_none()
        || parsed.query().is_some()
        || parsed.fragment().is_some()
    {
        return Err(bad());
    }
    let id = parsed.path().strip_prefix("/vp/exchange/").ok_or_else(bad)?;
    if id.is_empty() || id.contains('/') {
        return Err(bad());
    }
    Ok((parsed.origin().ascii_serialization(), id.to_string()))
}
