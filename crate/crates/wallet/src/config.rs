use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::WalletError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalletConfig {
    pub holder_did: String,
    #[serde(default)]
    pub key_path: Option<PathBuf>,
    #[serde(default)]
    pub store_path: Option<PathBuf>,
    /// Directory with the built approval UI, served under `/ui`.
    #[serde(default)]
    pub ui_dir: Option<PathBuf>,
    #[serde(default = "default_attempts")]
    pub relay_attempts: u32,
    #[serde(default = "default_spacing")]
    pub relay_spacing_secs: u64,
    #[serde(default)]
    pub public_base: Option<String>,
    #[serde(default)]
    pub bind: Option<String>,
    #[serde(default)]
    pub hosts: BTreeMap<String, String>,
}

fn default_attempts() -> u32 {
    3
}

fn default_spacing() -> u64 {
    1
}

impl WalletConfig {
    pub fn new(holder_did: impl Into<String>) -> Self {
        Self {
            holder_did: holder_did.into(),
            key_path: None,
            store_path: None,
            ui_dir: None,
            relay_attempts: default_attempts(),
            relay_spacing_secs: default_spacing(),
            public_base: None,
            bind: None,
            hosts: BTreeMap::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, WalletError> {
        toml::from_str(text).map_err(|e| WalletError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, WalletError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| WalletError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.key_path, &mut config.store_path, &mut config.ui_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(config)
    }
}
