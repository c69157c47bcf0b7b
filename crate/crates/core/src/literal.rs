//! JSON-style literal writing and strict, offset-reporting parsing.
//!
//! This is the value layer shared by the prompt renderer and most output
//! formats. Two spellings are produced:
//!
//! * compact: `{"a": 1, "b": [true, 2.5]}` (`", "` and `": "` separators),
//! * pretty: four-space indentation, one element per line, `[]`/`{}` for
//!   empty containers.
//!
//! Floats always carry a `.` or an exponent so they re-parse as floats;
//! integers never do. Non-finite floats are written as `NaN`, `Infinity` and
//! `-Infinity` and accepted back. Strings escape `"`, `\` and every control
//! character below U+0020; all other characters are written verbatim.

use std::fmt::Write as _;

use crate::value::{OrderedMap, Value};

/// A parse failure at a byte offset into the input.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message} at byte {offset}")]
pub struct SyntaxError {
    pub offset: usize,
    pub message: String,
}

impl SyntaxError {
    pub fn new(offset: usize, message: impl Into<String>) -> Self {
        Self {
            offset,
            message: message.into(),
        }
    }
}

/// Spelling options for literals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LiteralStyle {
    /// `True`/`False` instead of `true`/`false`.
    pub python_bools: bool,
    /// Object keys that are identifiers are written unquoted.
    pub bare_keys: bool,
}

impl LiteralStyle {
    pub const JSON: LiteralStyle = LiteralStyle {
        python_bools: false,
        bare_keys: false,
    };
    pub const PYTHON: LiteralStyle = LiteralStyle {
        python_bools: true,
        bare_keys: false,
    };
    pub const FLOW: LiteralStyle = LiteralStyle {
        python_bools: false,
        bare_keys: true,
    };
}

/// `[A-Za-z_][A-Za-z0-9_.-]*`
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'))
}

pub fn write_string(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            '\u{8}' => out.push_str("\\b"),
            '\u{c}' => out.push_str("\\f"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

pub fn quoted(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    write_string(&mut out, s);
    out
}

/// Writes a tool or argument name: bare when it is an identifier, quoted
/// otherwise.
pub fn write_name(out: &mut String, name: &str) {
    if is_identifier(name) {
        out.push_str(name);
    } else {
        write_string(out, name);
    }
}

pub fn write_float(out: &mut String, n: f64) {
    if n.is_nan() {
        out.push_str("NaN");
    } else if n.is_infinite() {
        out.push_str(if n > 0.0 { "Infinity" } else { "-Infinity" });
    } else {
        // Debug output is the shortest round-tripping form and always
        // contains a '.' or an exponent.
        let _ = write!(out, "{n:?}");
    }
}

fn write_key(out: &mut String, key: &str, style: LiteralStyle) {
    if style.bare_keys && is_identifier(key) && !is_reserved_word(key) {
        out.push_str(key);
    } else {
        write_string(out, key);
    }
}

fn is_reserved_word(s: &str) -> bool {
    matches!(
        s,
        "true" | "false" | "True" | "False" | "NaN" | "Infinity" | "null"
    )
}

fn write_scalar(out: &mut String, v: &Value, style: LiteralStyle) {
    match v {
        Value::String(s) => write_string(out, s),
        Value::Integer(i) => {
            let _ = write!(out, "{i}");
        }
        Value::Number(n) => write_float(out, *n),
        Value::Boolean(b) => out.push_str(match (b, style.python_bools) {
            (true, false) => "true",
            (false, false) => "false",
            (true, true) => "True",
            (false, true) => "False",
        }),
        Value::Array(_) | Value::Object(_) => unreachable!("not a scalar"),
    }
}

pub fn write_compact(out: &mut String, v: &Value, style: LiteralStyle) {
    match v {
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_compact(out, item, style);
            }
            out.push(']');
        }
        Value::Object(map) => write_compact_object(out, map, style),
        scalar => write_scalar(out, scalar, style),
    }
}

pub fn write_compact_object(out: &mut String, map: &OrderedMap<Value>, style: LiteralStyle) {
    out.push('{');
    for (i, (k, item)) in map.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_key(out, k, style);
        out.push_str(": ");
        write_compact(out, item, style);
    }
    out.push('}');
}

pub fn compact(v: &Value) -> String {
    let mut out = String::new();
    write_compact(&mut out, v, LiteralStyle::JSON);
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

/// Four-space pretty printing, starting at indentation `level` (the opening
/// bracket is assumed to be already positioned by the caller).
pub fn write_pretty(out: &mut String, v: &Value, level: usize) {
    match v {
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                indent(out, level + 1);
                write_pretty(out, item, level + 1);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, level);
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            for (i, (k, item)) in map.iter().enumerate() {
                indent(out, level + 1);
                write_string(out, k);
                out.push_str(": ");
                write_pretty(out, item, level + 1);
                if i + 1 < map.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, level);
            out.push('}');
        }
        scalar => write_scalar(out, scalar, LiteralStyle::JSON),
    }
}

pub fn pretty(v: &Value) -> String {
    let mut out = String::new();
    write_pretty(&mut out, v, 0);
    out
}

/// Byte cursor over a text being parsed. Offsets in errors are absolute
/// byte positions into the original text.
#[derive(Debug, Clone)]
pub struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(text: &'a str) -> Self {
        Self { text, pos: 0 }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    pub fn is_eof(&self) -> bool {
        self.pos >= self.text.len()
    }

    pub fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    pub fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    pub fn error(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError::new(self.pos, message)
    }

    pub fn starts_with(&self, s: &str) -> bool {
        self.rest().starts_with(s)
    }

    pub fn eat(&mut self, s: &str) -> bool {
        if self.starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, s: &str) -> Result<(), SyntaxError> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.error(format!("expected {s:?}")))
        }
    }

    /// JSON insignificant whitespace.
    pub fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if matches!(c, ' ' | '\t' | '\n' | '\r') {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    pub fn expect_eof(&self) -> Result<(), SyntaxError> {
        if self.is_eof() {
            Ok(())
        } else {
            Err(self.error("unexpected trailing text"))
        }
    }

    /// Consumes up to (not including) the next `\n`, or to end of input.
    pub fn take_line(&mut self) -> &'a str {
        let rest = self.rest();
        let end = rest.find('\n').unwrap_or(rest.len());
        self.pos += end;
        &rest[..end]
    }

    /// Consumes a `\n`, failing otherwise.
    pub fn newline(&mut self) -> Result<(), SyntaxError> {
        self.expect("\n")
    }

    pub fn parse_string(&mut self) -> Result<String, SyntaxError> {
        let start = self.pos;
        if !self.eat("\"") {
            return Err(self.error("expected string"));
        }
        let mut out = String::new();
        loop {
            let here = self.pos;
            match self.bump() {
                None => return Err(SyntaxError::new(start, "unterminated string")),
                Some('"') => return Ok(out),
                Some('\\') => match self.bump() {
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    Some('/') => out.push('/'),
                    Some('n') => out.push('\n'),
                    Some('r') => out.push('\r'),
                    Some('t') => out.push('\t'),
                    Some('b') => out.push('\u{8}'),
                    Some('f') => out.push('\u{c}'),
                    Some('u') => out.push(self.parse_unicode_escape(here)?),
                    _ => return Err(SyntaxError::new(here, "invalid escape")),
                },
                Some(c) if (c as u32) < 0x20 => {
                    return Err(SyntaxError::new(here, "unescaped control character"))
                }
                Some(c) => out.push(c),
            }
        }
    }

    fn hex4(&mut self, at: usize) -> Result<u32, SyntaxError> {
        let digits = self.rest().get(..4).unwrap_or("");
        if digits.len() != 4 || !digits.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(SyntaxError::new(at, "invalid unicode escape"));
        }
        self.pos += 4;
        Ok(u32::from_str_radix(digits, 16).expect("checked hex"))
    }

    fn parse_unicode_escape(&mut self, at: usize) -> Result<char, SyntaxError> {
        let first = self.hex4(at)?;
        let code = if (0xd800..0xdc00).contains(&first) {
            if !self.eat("\\u") {
                return Err(SyntaxError::new(at, "unpaired surrogate"));
            }
            let second = self.hex4(at)?;
            if !(0xdc00..0xe000).contains(&second) {
                return Err(SyntaxError::new(at, "unpaired surrogate"));
            }
            0x10000 + ((first - 0xd800) << 10) + (second - 0xdc00)
        } else {
            first
        };
        char::from_u32(code).ok_or_else(|| SyntaxError::new(at, "invalid unicode escape"))
    }

    pub fn parse_identifier(&mut self) -> Result<&'a str, SyntaxError> {
        let rest = self.rest();
        let end = rest
            .char_indices()
            .find(|&(i, c)| {
                !(c.is_ascii_alphanumeric()
                    || c == '_'
                    || (i > 0 && matches!(c, '.' | '-')))
            })
            .map(|(i, _)| i)
            .unwrap_or(rest.len());
        let ident = &rest[..end];
        if !is_identifier(ident) {
            return Err(self.error("expected identifier"));
        }
        self.pos += end;
        Ok(ident)
    }

    /// Reads a bare identifier or a quoted name.
    pub fn parse_name(&mut self) -> Result<String, SyntaxError> {
        if self.peek() == Some('"') {
            self.parse_string()
        } else {
            self.parse_identifier().map(str::to_string)
        }
    }

    fn parse_number(&mut self) -> Result<Value, SyntaxError> {
        let start = self.pos;
        let bytes = self.text.as_bytes();
        let mut i = self.pos;
        if bytes.get(i) == Some(&b'-') {
            i += 1;
        }
        if self.text[i..].starts_with("Infinity") {
            self.pos = i + "Infinity".len();
            return Ok(Value::Number(if i > start {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            }));
        }
        let int_start = i;
        while bytes.get(i).is_some_and(u8::is_ascii_digit) {
            i += 1;
        }
        if i == int_start {
            return Err(SyntaxError::new(start, "expected value"));
        }
        if bytes[int_start] == b'0' && i - int_start > 1 {
            return Err(SyntaxError::new(start, "leading zero in number"));
        }
        let mut is_float = false;
        if bytes.get(i) == Some(&b'.') {
            i += 1;
            let frac_start = i;
            while bytes.get(i).is_some_and(u8::is_ascii_digit) {
                i += 1;
            }
            if i == frac_start {
                return Err(SyntaxError::new(i, "expected fraction digits"));
            }
            is_float = true;
        }
        if matches!(bytes.get(i), Some(b'e' | b'E')) {
            i += 1;
            if matches!(bytes.get(i), Some(b'+' | b'-')) {
                i += 1;
            }
            let exp_start = i;
            while bytes.get(i).is_some_and(u8::is_ascii_digit) {
                i += 1;
            }
            if i == exp_start {
                return Err(SyntaxError::new(i, "expected exponent digits"));
            }
            is_float = true;
        }
        let token = &self.text[start..i];
        self.pos = i;
        if is_float {
            token
                .parse::<f64>()
                .map(Value::Number)
                .map_err(|_| SyntaxError::new(start, "invalid number"))
        } else {
            match token.parse::<i64>() {
                Ok(n) => Ok(Value::Integer(n)),
                Err(_) => Err(SyntaxError::new(start, "integer out of range")),
            }
        }
    }

    /// Parses one literal in the given style. Leading whitespace is not
    /// skipped.
    pub fn parse_value(&mut self, style: LiteralStyle) -> Result<Value, SyntaxError> {
        let (t, f) = if style.python_bools {
            ("True", "False")
        } else {
            ("true", "false")
        };
        match self.peek() {
            Some('"') => self.parse_string().map(Value::String),
            Some('[') => {
                self.pos += 1;
                let mut items = Vec::new();
                self.skip_ws();
                if self.eat("]") {
                    return Ok(Value::Array(items));
                }
                loop {
                    self.skip_ws();
                    items.push(self.parse_value(style)?);
                    self.skip_ws();
                    if self.eat("]") {
                        return Ok(Value::Array(items));
                    }
                    self.expect(",")?;
                }
            }
            Some('{') => self.parse_object(style).map(Value::Object),
            _ if self.eat(t) => Ok(Value::Boolean(true)),
            _ if self.eat(f) => Ok(Value::Boolean(false)),
            _ if self.eat("NaN") => Ok(Value::Number(f64::NAN)),
            Some(c) if c == '-' || c == 'I' || c.is_ascii_digit() => self.parse_number(),
            _ => Err(self.error("expected value")),
        }
    }

    pub fn parse_object(&mut self, style: LiteralStyle) -> Result<OrderedMap<Value>, SyntaxError> {
        self.expect("{")?;
        let mut map = OrderedMap::new();
        self.skip_ws();
        if self.eat("}") {
            return Ok(map);
        }
        loop {
            self.skip_ws();
            let key = if self.peek() == Some('"') {
                self.parse_string()?
            } else if style.bare_keys {
                self.parse_identifier()?.to_string()
            } else {
                return Err(self.error("expected string key"));
            };
            self.skip_ws();
            self.expect(":")?;
            self.skip_ws();
            let v = self.parse_value(style)?;
            map.push(key, v);
            self.skip_ws();
            if self.eat("}") {
                return Ok(map);
            }
            self.expect(",")?;
        }
    }
}

/// Parses a whole text as exactly one JSON literal (surrounding whitespace
/// allowed).
pub fn parse_json(text: &str) -> Result<Value, SyntaxError> {
    let mut cur = Cursor::new(text);
    cur.skip_ws();
    let v = cur.parse_value(LiteralStyle::JSON)?;
    cur.skip_ws();
    cur.expect_eof()?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(pairs: Vec<(&str, Value)>) -> Value {
        Value::Object(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    #[test]
    fn compact_matches_python_separators() {
        let v = obj(vec![
            ("location", Value::from("California")),
            ("radius", Value::Integer(50)),
        ]);
        assert_eq!(compact(&v), r#"{"location": "California", "radius": 50}"#);
    }

    #[test]
    fn pretty_uses_four_spaces_and_empty_brackets() {
        let v = obj(vec![
            ("a", Value::Array(vec![])),
            ("b", Value::Array(vec![Value::Integer(1), Value::Boolean(true)])),
            ("c", Value::Object(OrderedMap::new())),
        ]);
        assert_eq!(
            pretty(&v),
            "{\n    \"a\": [],\n    \"b\": [\n        1,\n        true\n    ],\n    \"c\": {}\n}"
        );
    }

    #[test]
    fn floats_keep_their_kind() {
        for n in [50.0, -0.5, 1e-7, 1.5e300, f64::MAX, f64::MIN_POSITIVE] {
            let text = compact(&Value::Number(n));
            assert_eq!(parse_json(&text).unwrap(), Value::Number(n), "{text}");
        }
        assert_eq!(parse_json("50").unwrap(), Value::Integer(50));
        assert!(matches!(parse_json("-Infinity").unwrap(), Value::Number(n) if n == f64::NEG_INFINITY));
    }

    #[test]
    fn strings_escape_controls() {
        let s = "a\"b\\c\n\u{1}\u{7f}é😀";
        let text = quoted(s);
        assert_eq!(text, "\"a\\\"b\\\\c\\n\\u0001\u{7f}é😀\"");
        assert_eq!(parse_json(&text).unwrap(), Value::from(s));
        assert_eq!(parse_json(r#""😀""#).unwrap(), Value::from("😀"));
    }

    #[test]
    fn trailing_garbage_reports_offset() {
        let err = parse_json(r#"{"a": 1} xyz"#).unwrap_err();
        assert_eq!(err.offset, 9);
    }

    #[test]
    fn truncated_input_fails() {
        let err = parse_json(r#"{"a": [1, 2"#).unwrap_err();
        assert_eq!(err.offset, 11);
    }

    #[test]
    fn flow_keys_are_bare_when_possible() {
        let v = obj(vec![("loc", Value::from("x")), ("two words", Value::Integer(1)), ("true", Value::Integer(2))]);
        let mut out = String::new();
        write_compact(&mut out, &v, LiteralStyle::FLOW);
        assert_eq!(out, r#"{loc: "x", "two words": 1, "true": 2}"#);
        let mut cur = Cursor::new(&out);
        assert_eq!(cur.parse_value(LiteralStyle::FLOW).unwrap(), v);
    }

    #[test]
    fn python_bools_round_trip() {
        let v = Value::Array(vec![Value::Boolean(true), Value::Boolean(false)]);
        let mut out = String::new();
        write_compact(&mut out, &v, LiteralStyle::PYTHON);
        assert_eq!(out, "[True, False]");
        assert_eq!(Cursor::new(&out).parse_value(LiteralStyle::PYTHON).unwrap(), v);
    }

    #[test]
    fn names_quote_only_when_needed() {
        let mut out = String::new();
        write_name(&mut out, "get_fire_info");
        out.push(' ');
        write_name(&mut out, "2fa code");
        assert_eq!(out, "get_fire_info \"2fa code\"");
        let mut cur = Cursor::new(&out);
        assert_eq!(cur.parse_name().unwrap(), "get_fire_info");
        cur.expect(" ").unwrap();
        assert_eq!(cur.parse_name().unwrap(), "2fa code");
    }
}
