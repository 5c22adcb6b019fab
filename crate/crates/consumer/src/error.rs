use thiserror::Error;

use crate::session::SessionStatus;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConsumerError {
    #[error("unknown flow {0}")]
    UnknownFlow(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session is {0:?}")]
    WrongState(SessionStatus),
    #[error("machine authentication failed for {0}")]
    MachineAuth(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider rejected the grant request: {0}")]
    ProviderRejected(String),
    #[error("continuation rejected: {0}")]
    ContinuationRejected(String),
    #[error("resource call unauthorized: {0}")]
    ResourceUnauthorized(String),
    #[error("no wallet endpoint configured")]
    NoWallet,
    #[error("wallet rejected the exchange URI: {0}")]
    WalletRejected(String),
    #[error("config: {0}")]
    Config(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

impl ConsumerError {
    /// The rejection label carried by provider-side errors, or the variant name.
    pub fn label(&self) -> String {
        match self {
            Self::ProviderRejected(r) | Self::ContinuationRejected(r) | Self::ResourceUnauthorized(r) => r.clone(),
            Self::WrongState(_) => "WrongState".into(),
            Self::UnknownFlow(_) => "UnknownFlow".into(),
            Self::UnknownSession(_) => "UnknownSession".into(),
            Self::MachineAuth(_) => "MachineAuth".into(),
            Self::Transport(_) => "TransportError".into(),
            Self::NoWallet => "NoWallet".into(),
            Self::WalletRejected(_) => "WalletRejected".into(),
            Self::Config(_) => "Config".into(),
            Self::Malformed(_) => "Malformed".into(),
        }
    }
}
