//! Shared building blocks for a GNAP4VP deployment: protocol messages,
//! canonical encoding, signatures and possession proofs, did:web resolution,
//! verifiable credentials, and the transport abstraction every role uses.

pub mod canonical;
pub mod clock;
pub mod crypto;
pub mod did;
pub mod encoding;
pub mod http;
pub mod model;
pub mod random;
pub mod transcript;
pub mod transport;
pub mod vc;

pub use canonical::{canonical_bytes, canonical_serialize};
pub use clock::{Clock, ManualClock, SystemClock};
pub use crypto::{KeyPair, PublicKey, SignedEnvelope};
pub use model::{FlowId, Timestamp};
pub use random::RandomSource;
