//! Provider side of GNAP4VP: grant negotiation, VP exchange, continuation,
//! LVP processing with a replay guard, and a resource server that only
//! honours key-bound tokens.

pub mod config;
pub mod error;
pub mod grant;
pub mod replay;
pub mod routes;
pub mod service;

pub use config::{ProviderConfig, ResourceConfig, RightConfig, Ttls};
pub use error::{LvpRejection, ProviderError, ResourceRejection};
pub use grant::{GrantEvent, GrantRecord, GrantStatus, Provenance, TokenRecord};
pub use routes::PROOF_HEADER;
pub use service::{Defenses, ProviderDeps, ProviderService, Snapshot};
