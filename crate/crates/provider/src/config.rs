use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gnap4vp_core::crypto::DEFAULT_POP_SKEW_SECS;
use gnap4vp_core::model::{FlowId, DEFAULT_MAX_METADATA_WINDOW_SECS};
use gnap4vp_core::vc::{InputDescriptor, PresentationDefinition};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    /// Public origin, e.g. `https://provider.example`.
    pub public_base: String,
    /// AS identifier; the audience consumers must name. Defaults to `public_base`.
    #[serde(default)]
    pub as_id: Option<String>,
    pub supported_flows: Vec<FlowId>,
    /// Right label -> descriptors a presentation must satisfy for it.
    pub rights: BTreeMap<String, RightConfig>,
    /// Resource path -> protecting right and payload.
    #[serde(default)]
    pub resources: BTreeMap<String, ResourceConfig>,
    #[serde(default)]
    pub registry_path: Option<PathBuf>,
    #[serde(default)]
    pub snapshot_path: Option<PathBuf>,
    #[serde(default)]
    pub ttl: Ttls,
    #[serde(default)]
    pub bind: Option<String>,
    /// Authority -> local socket, for desk runs where the public names do not resolve.
    #[serde(default)]
    pub hosts: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RightConfig {
    pub descriptors: Vec<InputDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceConfig {
    pub right: String,
    pub payload: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ttls {
    pub exchange_secs: i64,
    pub token_secs: i64,
    pub wait_secs: u64,
    pub max_metadata_window_secs: i64,
    pub pop_skew_secs: i64,
}

impl Default for Ttls {
    fn default() -> Self {
        Self {
            exchange_secs: 600,
            token_secs: 3600,
            wait_secs: 1,
            max_metadata_window_secs: DEFAULT_MAX_METADATA_WINDOW_SECS,
            pop_skew_secs: DEFAULT_POP_SKEW_SECS,
        }
    }
}

impl ProviderConfig {
    pub fn as_id(&self) -> &str {
        self.as_id.as_deref().unwrap_or(self.public_base.trim_end_matches('/'))
    }

    pub fn base(&self) -> &str {
        self.public_base.trim_end_matches('/')
    }

    pub fn grant_endpoint(&self) -> String {
        format!("{}/gnap/grant", self.base())
    }

    pub fn supports(&self, flow: FlowId) -> bool {
        self.supported_flows.contains(&flow)
    }

    /// Union of the descriptors of `labels`, first occurrence of a descriptor id wins.
    /// Returns the unknown labels on failure.
    pub fn definition_for(&self, labels: &[&str]) -> Result<PresentationDefinition, Vec<String>> {
        let unknown: Vec<String> =
            labels.iter().filter(|l| !self.rights.contains_key(**l)).map(|l| l.to_string()).collect();
        if !unknown.is_empty() {
            return Err(unknown);
        }
        let mut input_descriptors: Vec<InputDescriptor> = Vec::new();
        for label in labels {
            for d in &self.rights[*label].descriptors {
                if !input_descriptors.iter().any(|x| x.descriptor_id == d.descriptor_id) {
                    input_descriptors.push(d.clone());
                }
            }
        }
        Ok(PresentationDefinition { definition_id: labels.join("+"), input_descriptors })
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Loads a TOML file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.registry_path, &mut config.snapshot_path].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(config)
    }
}
