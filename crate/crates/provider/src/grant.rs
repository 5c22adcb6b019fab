//! Provider-side records and the grant state machine.

use gnap4vp_core::model::{AccessToken, FlowId, GrantRequest, Timestamp};
use gnap4vp_core::vc::SubjectClaims;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrantStatus {
    PendingInteraction,
    InteractionComplete,
    Issued,
    Denied,
    Expired,
}

/// Inputs that move a grant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GrantEvent {
    VpAccepted,
    VpRejected,
    LvpAccepted,
    ContinueAccepted,
    ContinueBadRef,
    Expire,
}

impl GrantStatus {
    pub const ALL: [GrantStatus; 5] = [
        GrantStatus::PendingInteraction,
        GrantStatus::InteractionComplete,
        GrantStatus::Issued,
        GrantStatus::Denied,
        GrantStatus::Expired,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(self, GrantStatus::Issued | GrantStatus::Denied | GrantStatus::Expired)
    }

    /// The whole transition relation; `None` means the event is refused.
    pub fn next(self, event: GrantEvent) -> Option<GrantStatus> {
        use GrantEvent::*;
        use GrantStatus::*;
        match (self, event) {
            (s, _) if s.is_terminal() => None,
            (_, Expire) => Some(Expired),
            (PendingInteraction, VpAccepted) => Some(InteractionComplete),
            (PendingInteraction, VpRejected) => Some(Denied),
            // LVP grants are created and accepted in one request.
            (PendingInteraction, LvpAccepted) => Some(Issued),
            (InteractionComplete, ContinueAccepted) => Some(Issued),
            (InteractionComplete, ContinueBadRef) => Some(Denied),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrantRecord {
    pub grant_id: String,
    pub request: GrantRequest,
    pub selected_flow: FlowId,
    pub status: GrantStatus,
    /// Current continuation token; `None` once consumed.
    pub continuation_token: Option<String>,
    pub exchange_id: Option<String>,
    pub issued_token_id: Option<String>,
    /// Claims accepted while validating the presentation.
    #[serde(default)]
    pub accepted_claims: Option<SubjectClaims>,
    pub created_at: Timestamp,
}

impl GrantRecord {
    pub fn apply(&mut self, event: GrantEvent) -> Result<(), GrantStatus> {
        match self.status.next(event) {
            Some(next) => {
                self.status = next;
                Ok(())
            }
            None => Err(self.status),
        }
    }

    pub fn invariant_holds(&self) -> bool {
        let issued_ok = self.status != GrantStatus::Issued || self.issued_token_id.is_some();
        let pending_ok = self.status != GrantStatus::PendingInteraction
            || self.selected_flow != FlowId::WalletInteraction
            || self.exchange_id.is_some();
        issued_ok && pending_ok
    }
}

/// What justified issuing a token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    SessionBoundVp { exchange_id: String },
    Lvp { metadata_digest: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenRecord {
    pub token_id: String,
    pub grant_id: String,
    pub flow: FlowId,
    pub token: AccessToken,
    pub provenance: Provenance,
}
