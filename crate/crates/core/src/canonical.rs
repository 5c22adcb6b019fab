//! Canonical JSON encoding.
//!
//! Values are routed through [`serde_json::Value`] and written with object
//! keys sorted by byte order (independent of whether the map type preserves
//! insertion order), no insignificant whitespace, and integers without leading
//! zeros. Signatures and replay digests are always computed over these bytes.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::model::{Invariants, ModelError};

/// Canonical bytes of a value whose invariants hold.
pub fn canonical_serialize<T: Serialize + Invariants>(message: &T) -> Result<Vec<u8>, ModelError> {
    let violations = message.violations();
    if !violations.is_empty() {
        return Err(ModelError::InvariantViolation(violations));
    }
    Ok(canonical_bytes(message))
}

/// Canonical bytes without invariant checks. Used for signing inputs that are
/// fragments of a larger message.
pub fn canonical_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let tree = serde_json::to_value(value).expect("wire types serialize to JSON");
    let mut out = Vec::with_capacity(256);
    write_value(&tree, &mut out);
    out
}

fn write_value(value: &Value, out: &mut Vec<u8>) {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.sort_unstable_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
            out.push(b'{');
            for (i, (key, item)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_string(key, out);
                out.push(b':');
                write_value(item, out);
            }
            out.push(b'}');
        }
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_value(item, out);
            }
            out.push(b']');
        }
        Value::String(text) => write_string(text, out),
        scalar => out.extend_from_slice(scalar.to_string().as_bytes()),
    }
}

fn write_string(text: &str, out: &mut Vec<u8>) {
    serde_json::to_writer(&mut *out, text).expect("strings always encode");
}

pub fn canonical_digest<T: Serialize + ?Sized>(value: &T) -> [u8; 32] {
    Sha256::digest(canonical_bytes(value)).into()
}

pub fn from_canonical<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ModelError> {
    serde_json::from_slice(bytes).map_err(|e| ModelError::Decode(e.to_string()))
}
