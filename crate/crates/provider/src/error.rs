use gnap4vp_core::crypto::ProofRejection;
use gnap4vp_core::model::ErrorBody;
use gnap4vp_core::vc::PresentationRejection;
use thiserror::Error;

use crate::grant::GrantStatus;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config io error: {0}")]
    Io(String),
    #[error("registry: {0}")]
    Registry(String),
}

/// Why the LVP pipeline refused a grant request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum LvpRejection {
    #[error("metadata validity window does not contain now")]
    WindowViolation,
    #[error("metadata audience is not this authorization server")]
    AudienceMismatch,
    #[error("identical metadata was already accepted")]
    Replay,
    #[error("metadata signature does not verify under the DID document key")]
    BadSignature,
    #[error("DID document or linked presentation could not be fetched")]
    FetchFailed,
    #[error("DID document has no linked presentation service")]
    NoLvpService,
    #[error("linked presentation is held by a different DID")]
    HolderMismatch,
    #[error("linked presentation rejected: {0}")]
    Presentation(PresentationRejection),
    #[error("presented credentials do not satisfy the definition")]
    DefinitionNotSatisfied,
}

impl LvpRejection {
    pub fn label(self) -> &'static str {
        match self {
            Self::WindowViolation => "WindowViolation",
            Self::AudienceMismatch => "AudienceMismatch",
            Self::Replay => "Replay",
            Self::BadSignature => "BadSignature",
            Self::FetchFailed => "FetchFailed",
            Self::NoLvpService => "NoLvpService",
            Self::HolderMismatch => "HolderMismatch",
            Self::Presentation(p) => p.label(),
            Self::DefinitionNotSatisfied => "DefinitionNotSatisfied",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ResourceRejection {
    #[error("unknown token")]
    UnknownToken,
    #[error("token expired")]
    ExpiredToken,
    #[error("token rights do not cover the resource")]
    InsufficientRights,
    #[error(transparent)]
    Proof(#[from] ProofRejection),
}

impl ResourceRejection {
    pub fn label(self) -> &'static str {
        match self {
            Self::UnknownToken => "UnknownToken",
            Self::ExpiredToken => "ExpiredToken",
            Self::InsufficientRights => "InsufficientRights",
            Self::Proof(p) => proof_label(p),
        }
    }
}

pub fn proof_label(p: ProofRejection) -> &'static str {
    match p {
        ProofRejection::BadSignature => "BadSignature",
        ProofRejection::DigestMismatch => "DigestMismatch",
        ProofRejection::StaleProof => "StaleProof",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("no requested flow is supported")]
    FlowNotSupported,
    #[error("invalid request: {}", .0.join("; "))]
    InvalidRequest(Vec<String>),
    #[error("unknown exchange")]
    UnknownExchange,
    #[error("exchange expired")]
    ExchangeExpired,
    #[error("exchange already finished")]
    AlreadyTerminal,
    #[error("unknown grant")]
    UnknownGrant,
    #[error("continuation token does not match")]
    BadContinuationToken,
    #[error("continuation request proof rejected: {0}")]
    BadContinuationProof(ProofRejection),
    #[error("interaction reference does not match")]
    BadInteractionRef,
    #[error("grant is {0:?}")]
    WrongState(GrantStatus),
    #[error("LVP authorization rejected: {0}")]
    Lvp(LvpRejection),
    #[error("unauthorized: {0}")]
    Unauthorized(ResourceRejection),
    #[error("unknown resource")]
    UnknownResource,
}

impl ProviderError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::FlowNotSupported => "FlowNotSupported",
            Self::InvalidRequest(_) => "InvalidRequest",
            Self::UnknownExchange => "UnknownExchange",
            Self::ExchangeExpired => "ExchangeExpired",
            Self::AlreadyTerminal => "AlreadyTerminal",
            Self::UnknownGrant => "UnknownGrant",
            Self::BadContinuationToken => "BadContinuationToken",
            Self::BadContinuationProof(_) => "BadContinuationProof",
            Self::BadInteractionRef => "BadInteractionRef",
            Self::WrongState(_) => "WrongState",
            Self::Lvp(_) => "LvpRejected",
            Self::Unauthorized(_) => "Unauthorized",
            Self::UnknownResource => "UnknownResource",
        }
    }

    pub fn reason(&self) -> Option<&'static str> {
        match self {
            Self::BadContinuationProof(p) => Some(proof_label(*p)),
            Self::Lvp(r) => Some(r.label()),
            Self::Unauthorized(r) => Some(r.label()),
            _ => None,
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            Self::FlowNotSupported | Self::InvalidRequest(_) | Self::BadInteractionRef | Self::WrongState(_) => 400,
            Self::BadContinuationToken | Self::BadContinuationProof(_) | Self::Unauthorized(_) => 401,
            Self::Lvp(_) => 403,
            Self::UnknownExchange | Self::UnknownGrant | Self::UnknownResource => 404,
            Self::AlreadyTerminal => 409,
            Self::ExchangeExpired => 410,
        }
    }

    pub fn to_body(&self) -> ErrorBody {
        let body = ErrorBody::new(self.code()).with_description(self.to_string());
        match self.reason() {
            Some(r) => body.with_reason(r),
            None => body,
        }
    }
}
