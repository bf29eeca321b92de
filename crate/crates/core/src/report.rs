//! Deterministic JSON emission.
//!
//! Every report is wrapped in an envelope carrying the schema version and
//! the working precision. Floating-point values are written as decimal
//! strings, the shortest ones that round-trip to the same double; exact
//! high-precision quantities are already strings when they get here.

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::Error;

pub const SCHEMA_VERSION: &str = "1.0";

/// Shortest round-trip decimal, positional in a readable range and
/// exponential outside it.
pub fn decimal_f64(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn stringify_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => Value::String(decimal_f64(n.as_f64().unwrap())),
        Value::Array(items) => Value::Array(items.into_iter().map(stringify_floats).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, stringify_floats(v))).collect()),
        other => other,
    }
}

/// Envelope `{schema_version, command, precision_bits, float_format, result, flags}`.
pub fn envelope<T: Serialize>(command: &str, precision_bits: u32, result: &T, flags: &[String]) -> Value {
    let result = serde_json::to_value(result).expect("reports serialize");
    let mut map = Map::new();
    map.insert("schema_version".into(), json!(SCHEMA_VERSION));
    map.insert("command".into(), json!(command));
    map.insert("precision_bits".into(), json!(precision_bits));
    map.insert("float_format".into(), json!("binary64 shortest round-trip decimal"));
    map.insert("flags".into(), json!(flags));
    map.insert("result".into(), stringify_floats(result));
    Value::Object(map)
}

pub fn error_envelope(err: &Error) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "error": { "kind": err.kind(), "message": err.to_string() },
    })
}

/// Pretty JSON with keys in sorted order and a trailing newline.
pub fn to_bytes(v: &Value) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("values serialize");
    out.push(b'\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_become_strings() {
        let v = envelope("x", 256, &json!({"a": 0.5, "b": [1e-300, 3], "c": "keep"}), &[]);
        assert_eq!(v["result"]["a"], "0.5");
        assert_eq!(v["result"]["b"][0], "1e-300");
        assert_eq!(v["result"]["b"][1], 3);
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
    }

    #[test]
    fn decimal_round_trips() {
        for x in [0.1, 1.0 / 3.0, 123456.789, 2.5e-17, -7e20] {
            assert_eq!(decimal_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
