//! Deterministic numeric output.

use serde::Serialize;
use serde_json::{Map, Number, Value};

/// Significant digits kept in every printed float.
pub const SIG_DIGITS: usize = 15;

/// `x` rounded to [`SIG_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Shortest decimal text of `round_sig(x)`.
pub fn fmt_f64(x: f64) -> String {
    let r = round_sig(x);
    if r.is_finite() {
        Number::from_f64(r).map_or_else(|| r.to_string(), |n| n.to_string())
    } else {
        r.to_string()
    }
}

fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            n.as_f64().and_then(|x| Number::from_f64(round_sig(x))).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_value).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

/// Serializes `body` as a JSON object with a leading `"schema"` key and all
/// floats rounded. Non-finite floats become `null`.
pub fn json_document(schema: &str, body: &impl Serialize) -> Value {
    let mut out = Map::new();
    out.insert("schema".into(), Value::String(format!("snaq.{schema}/1")));
    match round_value(serde_json::to_value(body).expect("serializable output")) {
        Value::Object(fields) => out.extend(fields),
        other => {
            out.insert("value".into(), other);
        }
    }
    Value::Object(out)
}

pub fn to_pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values always print")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn schema_comes_first() {
        #[derive(Serialize)]
        struct Body {
            a: f64,
        }
        let doc = json_document("demo", &Body { a: 0.1 + 0.2 });
        let text = serde_json::to_string(&doc).unwrap();
        assert_eq!(text, r#"{"schema":"snaq.demo/1","a":0.3}"#);
    }

    proptest! {
        #[test]
        fn rounding_is_idempotent(x in proptest::num::f64::NORMAL) {
            let r = round_sig(x);
            prop_assert_eq!(round_sig(r), r);
            prop_assert!(((r - x) / x).abs() < 1e-14);
            prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), r);
        }
    }
}
