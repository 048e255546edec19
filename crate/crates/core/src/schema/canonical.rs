use serde_json::Value;

/// Canonical JSON bytes: keys sorted at every depth, no whitespace, numbers
/// in shortest round-trip form.
pub fn canonicalize(value: &Value) -> Vec<u8> {
    canonical_string(value).into_bytes()
}

pub fn canonical_string(value: &Value) -> String {
    let mut out = String::new();
    write_value(value, &mut out);
    out
}

fn write_value(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => out.push_str(&n.to_string()),
        Value::String(s) => write_str(s, out),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut entries: Vec<_> = map.iter().collect();
            entries.sort_by(|a, b| a.0.cmp(b.0));
            out.push('{');
            for (i, (k, v)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_str(k, out);
                out.push(':');
                write_value(v, out);
            }
            out.push('}');
        }
    }
}

fn write_str(s: &str, out: &mut String) {
    // serde_json's string escaping is already minimal and deterministic.
    out.push_str(&serde_json::to_string(s).expect("string serialization is infallible"));
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    #[test]
    fn sorts_keys() {
        assert_eq!(canonical_string(&json!({"b": 1, "a": 2})), r#"{"a":2,"b":1}"#);
        assert_eq!(canonical_string(&json!({})), "{}");
    }

    #[test]
    fn nested_and_numbers() {
        let v = json!({"z": [1, 2.5, {"y": null, "x": "q\""}], "a": {"d": true, "c": 1e3}});
        assert_eq!(
            canonical_string(&v),
            r#"{"a":{"c":1000.0,"d":true},"z":[1,2.5,{"x":"q\"","y":null}]}"#
        );
    }

    fn arb_json() -> impl Strategy<Value = Value> {
        let leaf = prop_oneof![
            Just(Value::Null),
            any::<bool>().prop_map(Value::Bool),
            any::<i64>().prop_map(|n| json!(n)),
            (-1e9f64..1e9).prop_map(|f| json!(f)),
            "[a-z\\n\"é]{0,6}".prop_map(Value::String),
        ];
        leaf.prop_recursive(4, 32, 6, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 0..5).prop_map(Value::Array),
                prop::collection::vec(("[a-e]{1,3}", inner), 0..5)
                    .prop_map(|kv| Value::Object(kv.into_iter().collect())),
            ]
        })
    }

    /// Rebuilds every object with its keys inserted in reversed-then-rotated
    /// order; the canonical form must not notice.
    fn reshuffle(v: &Value, seed: usize) -> Value {
        match v {
            Value::Object(map) => {
                let mut entries: Vec<_> = map.iter().collect();
                entries.reverse();
                let n = entries.len().max(1);
                entries.rotate_left(seed % n);
                let mut out = serde_json::Map::new();
                for (k, v) in entries {
                    out.insert(k.clone(), reshuffle(v, seed + 1));
                }
                Value::Object(out)
            }
            Value::Array(items) => Value::Array(items.iter().map(|i| reshuffle(i, seed)).collect()),
            other => other.clone(),
        }
    }

    proptest! {
        #[test]
        fn key_order_never_changes_bytes(v in arb_json(), seed in 0usize..8) {
            prop_assert_eq!(canonicalize(&v), canonicalize(&reshuffle(&v, seed)));
        }

        #[test]
        fn canonical_form_round_trips(v in arb_json()) {
            let text = canonical_string(&v);
            let back: Value = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(&back, &v);
            prop_assert!(!text.contains('\n'));
        }
    }
}
