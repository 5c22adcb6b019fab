use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gnap4vp_core::model::CallbackMode;
use serde::{Deserialize, Serialize};

use crate::error::ConsumerError;

/// How the VP Exchange URI reaches the wallet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryMode {
    /// Printed as a QR payload; the wallet relays by redirect.
    Manual,
    /// Pushed to the wallet API; the wallet relays by a backend call.
    Automated,
}

impl DeliveryMode {
    pub fn callback_mode(self) -> CallbackMode {
        match self {
            DeliveryMode::Manual => CallbackMode::Redirect,
            DeliveryMode::Automated => CallbackMode::Push,
        }
    }
}

pub const DEFAULT_METADATA_WINDOW_SECS: i64 = 120;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsumerConfig {
    pub did: String,
    /// Public origin serving `/callback`, e.g. `https://consumer.example`.
    pub public_base: String,
    #[serde(default)]
    pub key_path: Option<PathBuf>,
    /// Wallet agent origin, e.g. `https://wallet.example`.
    #[serde(default)]
    pub wallet_endpoint: Option<String>,
    pub mode: DeliveryMode,
    #[serde(default = "default_window")]
    pub metadata_window_secs: i64,
    /// Machine id -> shared secret. Empty means any machine is accepted.
    #[serde(default)]
    pub machine_secrets: BTreeMap<String, String>,
    #[serde(default)]
    pub state_path: Option<PathBuf>,
    #[serde(default)]
    pub bind: Option<String>,
    /// Authority -> local socket, for desk runs.
    #[serde(default)]
    pub hosts: BTreeMap<String, String>,
}

fn default_window() -> i64 {
    DEFAULT_METADATA_WINDOW_SECS
}

impl ConsumerConfig {
    pub fn base(&self) -> &str {
        self.public_base.trim_end_matches('/')
    }

    pub fn callback_uri(&self, session_id: &str) -> String {
        format!("{}/callback?session={session_id}", self.base())
    }

    pub fn from_toml(text: &str) -> Result<Self, ConsumerError> {
        toml::from_str(text).map_err(|e| ConsumerError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConsumerError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConsumerError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.key_path, &mut config.state_path].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(config)
    }
}
