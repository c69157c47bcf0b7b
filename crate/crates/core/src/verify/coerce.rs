//! Type coercion table used for repairs and for lenient matching.
//!
//! | from                       | to                 | rule                                   |
//! |----------------------------|--------------------|----------------------------------------|
//! | string, decimal grammar    | number             | integer grammar gives an integer value |
//! | string, integer grammar    | integer            | no fraction, no exponent               |
//! | `"true"` / `"false"`       | boolean            | ASCII case-insensitive                 |
//! | string holding JSON list   | array              | whole string must parse                |
//! | string holding JSON object | object             | whole string must parse                |
//! | integer                    | number             | accepted as is                         |
//!
//! Everything else is not coercible.

use std::sync::LazyLock;

use regex::Regex;

use crate::literal::parse_json;
use crate::model::ParamType;
use crate::value::Value;

static DECIMAL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^-?(0|[1-9][0-9]*)(\.[0-9]+)?([eE][+-]?[0-9]+)?$").unwrap());
static INTEGER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^-?(0|[1-9][0-9]*)$").unwrap());

/// Parses a strict decimal literal. Integer-grammar text becomes an
/// integer when it fits in 64 bits.
pub fn parse_decimal(s: &str) -> Option<Value> {
    if INTEGER.is_match(s) {
        if let Ok(i) = s.parse::<i64>() {
            return Some(Value::Integer(i));
        }
    }
    if DECIMAL.is_match(s) {
        let n: f64 = s.parse().ok()?;
        return n.is_finite().then_some(Value::Number(n));
    }
    None
}

/// Converts `v` to the declared type, or `None` when the table has no rule.
/// Values that already satisfy the type are returned unchanged.
pub fn coerce(v: &Value, to: ParamType) -> Option<Value> {
    if to.accepts(v.kind()) {
        return Some(v.clone());
    }
    let s = v.as_str()?;
    match to {
        ParamType::Number => parse_decimal(s),
        ParamType::Integer => INTEGER.is_match(s).then(|| s.parse().ok().map(Value::Integer))?,
        ParamType::Boolean => {
            if s.eq_ignore_ascii_case("true") {
                Some(Value::Boolean(true))
            } else if s.eq_ignore_ascii_case("false") {
                Some(Value::Boolean(false))
            } else {
                None
            }
        }
        ParamType::Array => parse_json(s.trim()).ok().filter(|p| matches!(p, Value::Array(_))),
        ParamType::Object => parse_json(s.trim()).ok().filter(|p| matches!(p, Value::Object(_))),
        ParamType::String => None,
    }
}
