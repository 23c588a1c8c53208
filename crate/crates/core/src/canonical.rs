//! Canonical JSON encoding shared by every on-disk artifact.
//!
//! Keys are sorted alphabetically at every depth, output is pretty-printed
//! with two-space indentation, UTF-8, LF line endings and a trailing newline.

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

/// Recursively rebuilds `value` with object keys in ascending order.
pub fn sort_keys(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut out = Map::new();
            for (k, v) in entries {
                out.insert(k, sort_keys(v));
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

/// Serializes `value` into the canonical document form.
pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let tree = sort_keys(serde_json::to_value(value)?);
    let mut text = serde_json::to_string_pretty(&tree)?;
    text.push('\n');
    Ok(text)
}

/// Compact canonical form, used for hashing.
pub fn to_canonical_compact<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let tree = sort_keys(serde_json::to_value(value)?);
    serde_json::to_string(&tree)
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
