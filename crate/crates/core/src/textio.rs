//! Deterministic text output: fixed 17-significant-digit floats and a JSON
//! writer that applies the same formatting so identical inputs produce
//! byte-identical files regardless of platform or thread count.

use serde_json::Value;

/// 17 significant digits, C locale, sign-normalized zero.
pub fn fmt_float(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

/// Render a JSON value with `fmt_float` applied to every float. Object keys
/// come out in serde_json's default (sorted) order.
pub fn write_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(value, &mut out);
    out
}

fn write_value(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                out.push_str(&fmt_float(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serialization")),
        Value::Array(items) => {
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (k, (key, item)) in map.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("key serialization"));
                out.push(':');
                write_value(item, out);
            }
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_have_17_significant_digits() {
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_float(-0.0), "0.0000000000000000e0");
        assert_eq!(fmt_float(0.125), "1.2500000000000000e-1");
    }

    #[test]
    fn json_writer_formats_floats() {
        let v = json!({"b": 0.5, "a": [1.0, 2], "s": "x"});
        assert_eq!(
            write_json(&v),
            r#"{"a":[1.0000000000000000e0,2],"b":5.0000000000000000e-1,"s":"x"}"#
        );
    }
}
