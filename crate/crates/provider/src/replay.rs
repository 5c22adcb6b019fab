use std::collections::BTreeMap;
use std::sync::Mutex;

use gnap4vp_core::model::Timestamp;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayGuardEntry {
    /// base64url SHA-256 of the canonical signed metadata.
    pub metadata_digest: String,
    pub expires_at: Timestamp,
}

/// Exact-duplicate detector for signed client metadata.
#[derive(Debug, Default)]
pub struct ReplayGuard(Mutex<BTreeMap<String, Timestamp>>);

impl ReplayGuard {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false if `digest` is already present. Check and insert happen
    /// under one lock. Entries whose `expires_at` is before `now` are purged first.
    pub fn check_and_insert(&self, digest: &str, expires_at: Timestamp, now: Timestamp) -> bool {
        let mut seen = self.0.lock().expect("replay guard lock");
        seen.retain(|_, exp| *exp >= now);
        if seen.contains_key(digest) {
            return false;
        }
        seen.insert(digest.to_string(), expires_at);
        true
    }

    pub fn len(&self) -> usize {
        self.0.lock().expect("replay guard lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> Vec<ReplayGuardEntry> {
        self.0
            .lock()
            .expect("replay guard lock")
            .iter()
            .map(|(d, e)| ReplayGuardEntry { metadata_digest: d.clone(), expires_at: *e })
            .collect()
    }

    pub fn restore(&self, entries: Vec<ReplayGuardEntry>) {
        let mut seen = self.0.lock().expect("replay guard lock");
        seen.clear();
        seen.extend(entries.into_iter().map(|e| (e.metadata_digest, e.expires_at)));
    }
}
