//! Wallet agent of GNAP4VP. Runs beside (not inside) the consumer: it takes
//! VP Exchange URIs, picks credentials automatically or through the approval
//! queue, submits the presentation and relays the provider's answer to the
//! consumer callback.

pub mod agent;
pub mod config;
pub mod error;
pub mod exchange;
pub mod routes;
mod ui;

pub use agent::{SubmissionRecord, WalletAgent, WalletDeps};
pub use config::WalletConfig;
pub use error::WalletError;
pub use exchange::{parse_exchange_uri, IngestRequest, WalletExchange, WalletMode, WalletStatus};
pub use routes::ApproveRequest;
