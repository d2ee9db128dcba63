//! Canonical JSON encoding for story artifacts.
//!
//! Output is pretty-printed with two-space indentation, object keys sorted,
//! every float written with exactly four decimals and a trailing newline.
//! Two encodings of equal values are byte-identical.

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use super::{StoryData, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum SerialError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported schema_version {found:?} (expected {expected})")]
    SchemaVersion { found: Option<u64>, expected: u32 },
    #[error("value cannot be encoded: {0}")]
    Encode(String),
}

impl From<serde_json::Error> for SerialError {
    fn from(e: serde_json::Error) -> Self {
        SerialError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

/// Encodes any serializable value in the canonical form.
pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> Result<String, SerialError> {
    let value = serde_json::to_value(value).map_err(|e| SerialError::Encode(e.to_string()))?;
    let mut out = String::new();
    write_value(&mut out, &value, 0)?;
    out.push('\n');
    Ok(out)
}

pub fn serialize(story: &StoryData) -> Result<Vec<u8>, SerialError> {
    to_canonical_string(story).map(String::into_bytes)
}

/// Parses a `story.json`. Syntax errors carry line and column; a missing or
/// different `schema_version` is reported separately.
pub fn deserialize(bytes: &[u8]) -> Result<StoryData, SerialError> {
    let value: Value = serde_json::from_slice(bytes)?;
    let found = value.get("schema_version").and_then(Value::as_u64);
    if found != Some(u64::from(SCHEMA_VERSION)) {
        return Err(SerialError::SchemaVersion {
            found,
            expected: SCHEMA_VERSION,
        });
    }
    // Second pass on the bytes so shape errors also report a position.
    Ok(serde_json::from_slice(bytes)?)
}

fn write_value(out: &mut String, value: &Value, depth: usize) -> Result<(), SerialError> {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                let f = n
                    .as_f64()
                    .ok_or_else(|| SerialError::Encode(format!("bad number {n}")))?;
                let q = super::quantize(f);
                out.push_str(&format!("{q:.4}"));
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).map_err(|e| SerialError::Encode(e.to_string()))?)
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return Ok(());
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                indent(out, depth + 1);
                write_value(out, item, depth + 1)?;
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return Ok(());
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, key) in keys.iter().enumerate() {
                indent(out, depth + 1);
                out.push_str(
                    &serde_json::to_string(key).map_err(|e| SerialError::Encode(e.to_string()))?,
                );
                out.push_str(": ");
                write_value(out, &map[key.as_str()], depth + 1)?;
                if i + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, depth);
            out.push('}');
        }
    }
    Ok(())
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}
