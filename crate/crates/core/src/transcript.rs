//! Protocol step log shared by all roles of one run.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::model::{FlowId, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub flow: FlowId,
    pub step: u8,
    pub actor: String,
    pub note: String,
    pub at: Timestamp,
}

#[derive(Debug, Default)]
pub struct Transcript(Mutex<Vec<TranscriptEntry>>);

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, flow: FlowId, step: u8, actor: &str, note: impl Into<String>, at: Timestamp) {
        self.0.lock().expect("transcript lock").push(TranscriptEntry {
            flow,
            step,
            actor: actor.to_string(),
            note: note.into(),
            at,
        });
    }

    pub fn entries(&self) -> Vec<TranscriptEntry> {
        self.0.lock().expect("transcript lock").clone()
    }

    pub fn steps(&self, flow: FlowId) -> Vec<u8> {
        self.0.lock().expect("transcript lock").iter().filter(|e| e.flow == flow).map(|e| e.step).collect()
    }

    pub fn clear(&self) {
        self.0.lock().expect("transcript lock").clear();
    }
}

/// Optional transcript handle held by each role.
#[derive(Debug, Clone, Default)]
pub struct StepLog(Option<std::sync::Arc<Transcript>>);

impl StepLog {
    pub fn new(transcript: std::sync::Arc<Transcript>) -> Self {
        Self(Some(transcript))
    }

    pub fn disabled() -> Self {
        Self(None)
    }

    pub fn record(&self, flow: FlowId, step: u8, actor: &str, note: impl Into<String>, at: Timestamp) {
        if let Some(t) = &self.0 {
            t.record(flow, step, actor, note, at);
        }
    }
}
