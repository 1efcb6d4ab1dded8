use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

/// The value domain the vault can seal.
#[derive(Debug, Clone, PartialEq)]
pub enum Canonical {
    Bool(bool),
    Int(i128),
    Real(f64),
    Str(String),
    List(Vec<Canonical>),
    Map(BTreeMap<String, Canonical>),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CanonicalError {
    #[error("non-finite real at {0}")]
    NonFinite(String),
    #[error("null at {0}; absent values must be omitted")]
    Null(String),
    #[error("cannot serialize payload: {0}")]
    Serialize(String),
}

impl Canonical {
    pub fn from_json(v: &serde_json::Value) -> Result<Canonical, CanonicalError> {
        from_json_at(v, "$")
    }

    pub fn from_serialize<T: Serialize + ?Sized>(v: &T) -> Result<Canonical, CanonicalError> {
        // serde_json turns NaN and infinities into null, so they surface as
        // Null here; report them as what they almost always are.
        let json = serde_json::to_value(v).map_err(|e| CanonicalError::Serialize(e.to_string()))?;
        Canonical::from_json(&json).map_err(|e| match e {
            CanonicalError::Null(at) => CanonicalError::NonFinite(at),
            other => other,
        })
    }

    /// Sorted keys, no whitespace, reals with exactly six decimals.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write(&mut out);
        out
    }

    fn write(&self, out: &mut String) {
        match self {
            Canonical::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Canonical::Int(i) => {
                let _ = write!(out, "{i}");
            }
            Canonical::Real(r) => out.push_str(&real(*r)),
            Canonical::Str(s) => push_str(out, s),
            Canonical::List(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    item.write(out);
                }
                out.push(']');
            }
            Canonical::Map(m) => {
                out.push('{');
                for (i, (k, v)) in m.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    push_str(out, k);
                    out.push(':');
                    v.write(out);
                }
                out.push('}');
            }
        }
    }
}

fn from_json_at(v: &serde_json::Value, at: &str) -> Result<Canonical, CanonicalError> {
    use serde_json::Value as J;
    Ok(match v {
        J::Null => return Err(CanonicalError::Null(at.to_string())),
        J::Bool(b) => Canonical::Bool(*b),
        J::Number(n) => {
            if let Some(i) = n.as_i64() {
                Canonical::Int(i as i128)
            } else if let Some(u) = n.as_u64() {
                Canonical::Int(u as i128)
            } else {
                let f = n.as_f64().unwrap_or(f64::NAN);
                if !f.is_finite() {
                    return Err(CanonicalError::NonFinite(at.to_string()));
                }
                Canonical::Real(f)
            }
        }
        J::String(s) => Canonical::Str(s.clone()),
        J::Array(items) => Canonical::List(
            items
                .iter()
                .enumerate()
                .map(|(i, x)| from_json_at(x, &format!("{at}[{i}]")))
                .collect::<Result<_, _>>()?,
        ),
        J::Object(m) => Canonical::Map(
            m.iter()
                .map(|(k, x)| Ok((k.clone(), from_json_at(x, &format!("{at}.{k}"))?)))
                .collect::<Result<_, CanonicalError>>()?,
        ),
    })
}

fn real(r: f64) -> String {
    let s = format!("{r:.6}");
    // -0.0 and tiny negatives round to "-0.000000"; there is one zero
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

fn push_str(out: &mut String, s: &str) {
    out.push_str(&serde_json::to_string(s).expect("strings serialize"));
}

/// Canonical text of any serializable payload.
pub fn canonical_payload<T: Serialize + ?Sized>(value: &T) -> Result<String, CanonicalError> {
    Canonical::from_serialize(value).map(|c| c.render())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn documented_examples() {
        assert_eq!(canonical_payload(&json!({})).unwrap(), "{}");
        assert_eq!(canonical_payload(&json!({"b": 1, "a": 2})).unwrap(), r#"{"a":2,"b":1}"#);
        assert_eq!(canonical_payload(&json!(0.1)).unwrap(), "0.100000");
    }

    #[test]
    fn reals_ints_and_zero() {
        assert_eq!(canonical_payload(&json!([1, 1.0, -0.0, -3, 2.5e-7])).unwrap(), "[1,1.000000,0.000000,-3,0.000000]");
        assert_eq!(canonical_payload(&json!(u64::MAX)).unwrap(), "18446744073709551615");
    }

    #[test]
    fn nested_and_escaped() {
        let v = json!({"z": [true, {"y": "a\"b\n", "x": false}], "a": "é"});
        assert_eq!(
            canonical_payload(&v).unwrap(),
            r#"{"a":"é","z":[true,{"x":false,"y":"a\"b\n"}]}"#
        );
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(canonical_payload(&f64::NAN), Err(CanonicalError::NonFinite(_))));
        assert!(matches!(
            canonical_payload(&vec![1.0, f64::INFINITY]),
            Err(CanonicalError::NonFinite(at)) if at == "$[1]"
        ));
        assert!(matches!(Canonical::from_json(&json!({"a": null})), Err(CanonicalError::Null(_))));
    }
}
