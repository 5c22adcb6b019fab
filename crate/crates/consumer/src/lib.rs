//! Consumer global instance of GNAP4VP. Consumer machines talk only to this
//! instance; it negotiates with providers, validates wallet callbacks and
//! signs every resource call with its own key.

pub mod config;
pub mod error;
pub mod instance;
pub mod routes;
pub mod session;

pub use config::{ConsumerConfig, DeliveryMode};
pub use error::ConsumerError;
pub use instance::{ConsumerDefenses, ConsumerDeps, ConsumerInstance, StartRequest};
pub use routes::{FetchRequest, StartResponse};
pub use session::{AbortReason, CallbackOutcome, ConsumerSession, DeliveryReceipt, SessionStatus, SessionView};
