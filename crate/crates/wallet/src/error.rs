use thiserror::Error;

use crate::exchange::WalletStatus;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WalletError {
    #[error("not a VP exchange URI: {0}")]
    MalformedUri(String),
    #[error("could not fetch the exchange: {0}")]
    FetchFailed(String),
    #[error("unknown exchange {0}")]
    UnknownExchange(String),
    #[error("exchange is {0:?}")]
    WrongState(WalletStatus),
    #[error("selection leaves descriptors unsatisfied: {0:?}")]
    SelectionInvalid(Vec<String>),
    #[error("submission failed: {0}")]
    SubmitFailed(String),
    #[error("relay failed after {attempts} attempts: {reason}")]
    RelayFailed { attempts: u32, reason: String },
    #[error("config: {0}")]
    Config(String),
}

impl WalletError {
    pub fn label(&self) -> &'static str {
        match self {
            WalletError::MalformedUri(_) => "MalformedUri",
            WalletError::FetchFailed(_) => "FetchFailed",
            WalletError::UnknownExchange(_) => "UnknownExchange",
            WalletError::WrongState(_) => "WrongState",
            WalletError::SelectionInvalid(_) => "SelectionInvalid",
            WalletError::SubmitFailed(_) => "SubmitFailed",
            WalletError::RelayFailed { .. } => "RelayFailed",
            WalletError::Config(_) => "Config",
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            WalletError::MalformedUri(_) | WalletError::SelectionInvalid(_) => 400,
            WalletError::UnknownExchange(_) => 404,
            WalletError::WrongState(_) => 409,
            WalletError::FetchFailed(_) | WalletError::SubmitFailed(_) | WalletError::RelayFailed { .. } => 502,
            WalletError::Config(_) => 500,
        }
    }
}
