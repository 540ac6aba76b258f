use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::error::Result;

/// Significant digits kept for every float written to disk.
pub const SIGNIFICANT_DIGITS: usize = 9;

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

fn canonicalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"));
            Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut out = Map::new();
            for (k, v) in entries {
                out.insert(k, canonicalize(v));
            }
            Value::Object(out)
        }
        other => other,
    }
}

/// Pretty JSON with sorted keys, rounded floats and a trailing newline.
///
/// Equal inputs always give byte-identical output.
pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let v = canonicalize(serde_json::to_value(value)?);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_sorted_and_floats_rounded() {
        let s = to_canonical_json(&json!({"b": 0.1 + 0.2, "a": [1, 2.5e-13, 640.0]})).unwrap();
        assert_eq!(
            s,
            "{\n  \"a\": [\n    1,\n    2.5e-13,\n    640.0\n  ],\n  \"b\": 0.3\n}\n"
        );
    }

    #[test]
    fn rounding_is_idempotent() {
        for x in [std::f64::consts::PI, 1.0 / 3.0, 123456.789012345, -7.77e-9] {
            let r = round_sig(x);
            assert_eq!(round_sig(r), r);
            assert!((r - x).abs() <= x.abs() * 1e-8);
        }
    }
}
