use serde_json::Value;

const SIG_DIGITS: usize = 12;
const MAX_DENOMINATOR: i64 = 24;
const FRACTION_EPS: f64 = 1e-9;

/// Rounds to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

pub fn number(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        "0".into()
    } else {
        r.to_string()
    }
}

/// `p/q` for values within 1e-9 of a fraction with `q <= 24`, else decimals.
pub fn pretty_number(x: f64) -> String {
    for q in 1..=MAX_DENOMINATOR {
        let p = (x * q as f64).round();
        if (x - p / q as f64).abs() <= FRACTION_EPS {
            let p = p as i64;
            return if q == 1 {
                p.to_string()
            } else {
                format!("{p}/{q}")
            };
        }
    }
    number(x)
}

pub fn pretty_vector(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|&v| pretty_number(v)).collect();
    format!("({})", parts.join(", "))
}

pub fn csv_vector(values: &[f64]) -> String {
    values
        .iter()
        .map(|&v| number(v))
        .collect::<Vec<_>>()
        .join(",")
}

/// Replaces every float in a JSON tree by its 12-digit rounding.
pub fn round_json(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round_sig(x)) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

pub fn json_string(mut value: Value) -> String {
    round_json(&mut value);
    serde_json::to_string_pretty(&value).expect("JSON values serialize")
}

/// Flattens a JSON tree into `path,value` lines.
pub fn csv_pairs(value: &Value) -> String {
    let mut out = String::from("key,value\n");
    flatten(value, String::new(), &mut out);
    out
}

fn flatten(value: &Value, prefix: String, out: &mut String) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(v, key(k), out);
            }
        }
        Value::Array(items) if items.iter().all(Value::is_number) => {
            let nums: Vec<f64> = items.iter().filter_map(Value::as_f64).collect();
            out.push_str(&format!("{prefix},\"{}\"\n", csv_vector(&nums)));
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(v, key(&i.to_string()), out);
            }
        }
        Value::Number(n) => {
            let text = match n.as_f64() {
                Some(x) if n.is_f64() => number(x),
                _ => n.to_string(),
            };
            out.push_str(&format!("{prefix},{text}\n"));
        }
        Value::String(s) => out.push_str(&format!("{prefix},\"{}\"\n", s.replace('"', "\"\""))),
        Value::Bool(b) => out.push_str(&format!("{prefix},{b}\n")),
        Value::Null => out.push_str(&format!("{prefix},\n")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(number(1.0 / 3.0), "0.333333333333");
        assert_eq!(number(0.5), "0.5");
        assert_eq!(number(2.0 / 3.0), "0.666666666667");
        assert_eq!(number(-0.0), "0");
    }

    #[test]
    fn fractions() {
        assert_eq!(pretty_number(1.0 / 3.0), "1/3");
        assert_eq!(pretty_number(0.375), "3/8");
        assert_eq!(pretty_number(1.0), "1");
        assert_eq!(pretty_number(0.0), "0");
        assert_eq!(pretty_number(0.18), "0.18");
        assert_eq!(pretty_number(1.0 / 24.0), "1/24");
    }

    #[test]
    fn csv_flattening() {
        let v = serde_json::json!({"a": {"b": 0.5}, "xs": [0.25, 0.75], "ok": true});
        let text = csv_pairs(&v);
        assert!(text.contains("a.b,0.5\n"));
        assert!(text.contains("xs,\"0.25,0.75\"\n"));
        assert!(text.contains("ok,true\n"));
    }
}
