//! `xml`: one element per line at the call level, typed value elements.
//!
//! ```text
//! <output>
//! <thought>TEXT</thought>
//! <tool_calls>
//! <call name="ATTR">
//! <arg name="ATTR" type="KIND">CONTENT</arg>
//! </call>
//! </tool_calls>
//! </output>
//! ```
//!
//! Scalars are text content; arrays hold `<item type="KIND">` children and
//! objects hold `<entry key="ATTR" type="KIND">` children, written inline.
//! Text escapes `&`, `<`, `>` and every control character except `\n` and
//! `\t` (as `&#xH;`); attributes additionally escape `"`, `\n` and `\t`.

use std::fmt::Write as _;

use super::StepOutput;
use crate::literal::{self, Cursor, LiteralStyle, SyntaxError};
use crate::model::ToolCall;
use crate::value::{OrderedMap, Value, ValueKind};

fn escape(out: &mut String, s: &str, attr: bool) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attr => out.push_str("&quot;"),
            '\n' | '\t' if !attr => out.push(c),
            c if (c as u32) < 0x20 || c == '\u{7f}' => {
                let _ = write!(out, "&#x{:X};", c as u32);
            }
            c => out.push(c),
        }
    }
}

fn kind_name(kind: ValueKind) -> &'static str {
    kind.as_str()
}

fn write_value(out: &mut String, v: &Value) {
    match v {
        Value::String(s) => escape(out, s, false),
        Value::Array(items) => {
            for item in items {
                let _ = write!(out, "<item type=\"{}\">", kind_name(item.kind()));
                write_value(out, item);
                out.push_str("</item>");
            }
        }
        Value::Object(map) => {
            for (k, item) in map.iter() {
                out.push_str("<entry key=\"");
                escape(out, k, true);
                let _ = write!(out, "\" type=\"{}\">", kind_name(item.kind()));
                write_value(out, item);
                out.push_str("</entry>");
            }
        }
        scalar => literal::write_compact(out, scalar, LiteralStyle::JSON),
    }
}

pub(super) fn write(step: &StepOutput) -> String {
    let mut out = String::from("<output>\n<thought>");
    escape(&mut out, &step.thought, false);
    out.push_str("</thought>\n<tool_calls>\n");
    for call in &step.tool_calls {
        out.push_str("<call name=\"");
        escape(&mut out, &call.name, true);
        out.push_str("\">\n");
        for (k, v) in call.arguments.iter() {
            out.push_str("<arg name=\"");
            escape(&mut out, k, true);
            let _ = write!(out, "\" type=\"{}\">", kind_name(v.kind()));
            write_value(&mut out, v);
            out.push_str("</arg>\n");
        }
        out.push_str("</call>\n");
    }
    out.push_str("</tool_calls>\n</output>");
    out
}

/// Reads character data up to the next `<` (or `"` inside an attribute),
/// decoding entities.
fn read_text(cur: &mut Cursor, attr: bool) -> Result<String, SyntaxError> {
    let mut out = String::new();
    loop {
        match cur.peek() {
            None => return Err(cur.error("unexpected end of input")),
            Some('<') if !attr => return Ok(out),
            Some('"') if attr => return Ok(out),
            Some('<') => return Err(cur.error("unescaped '<' in attribute")),
            Some('>') => return Err(cur.error("unescaped '>'")),
            Some('&') => {
                let at = cur.pos();
                cur.bump();
                let rest = cur.rest();
                let end = rest
                    .find(';')
                    .filter(|&e| e <= 10)
                    .ok_or_else(|| SyntaxError::new(at, "unterminated entity"))?;
                let name = &rest[..end];
                let c = match name {
                    "amp" => '&',
                    "lt" => '<',
                    "gt" => '>',
                    "quot" => '"',
                    "apos" => '\'',
                    _ => {
                        let code = if let Some(hex) = name.strip_prefix("#x") {
                            u32::from_str_radix(hex, 16).ok()
                        } else if let Some(dec) = name.strip_prefix('#') {
                            dec.parse().ok()
                        } else {
                            None
                        };
                        code.and_then(char::from_u32)
                            .ok_or_else(|| SyntaxError::new(at, "unknown entity"))?
                    }
                };
                out.push(c);
                for _ in 0..=end {
                    cur.bump();
                }
            }
            Some(c) if attr && (c == '\n' || c == '\t') => {
                return Err(cur.error("raw whitespace control in attribute"))
            }
            Some(c) if (c as u32) < 0x20 && c != '\n' && c != '\t' => {
                return Err(cur.error("raw control character"))
            }
            Some(c) => {
                cur.bump();
                out.push(c);
            }
        }
    }
}

fn read_attr(cur: &mut Cursor, name: &str) -> Result<String, SyntaxError> {
    cur.expect(&format!(" {name}=\""))?;
    let v = read_text(cur, true)?;
    cur.expect("\"")?;
    Ok(v)
}

fn read_kind(cur: &mut Cursor) -> Result<ValueKind, SyntaxError> {
    cur.expect(" type=\"")?;
    let at = cur.pos();
    for kind in [
        ValueKind::String,
        ValueKind::Number,
        ValueKind::Integer,
        ValueKind::Boolean,
        ValueKind::Array,
        ValueKind::Object,
    ] {
        if cur.eat(kind.as_str()) && cur.eat("\"") {
            return Ok(kind);
        }
        if cur.pos() != at {
            return Err(SyntaxError::new(at, "unknown value type"));
        }
    }
    Err(SyntaxError::new(at, "unknown value type"))
}

fn read_value(cur: &mut Cursor, kind: ValueKind, close: &str) -> Result<Value, SyntaxError> {
    let v = match kind {
        ValueKind::String => Value::String(read_text(cur, false)?),
        ValueKind::Array => {
            let mut items = Vec::new();
            while cur.eat("<item") {
                let k = read_kind(cur)?;
                cur.expect(">")?;
                items.push(read_value(cur, k, "</item>")?);
            }
            Value::Array(items)
        }
        ValueKind::Object => {
            let mut map = OrderedMap::new();
            while cur.eat("<entry") {
                let key = read_attr(cur, "key")?;
                let k = read_kind(cur)?;
                cur.expect(">")?;
                map.push(key, read_value(cur, k, "</entry>")?);
            }
            Value::Object(map)
        }
        scalar_kind => {
            let at = cur.pos();
            let v = cur.parse_value(LiteralStyle::JSON)?;
            if v.kind() != scalar_kind {
                return Err(SyntaxError::new(at, format!("expected {scalar_kind} content")));
            }
            v
        }
    };
    cur.expect(close)?;
    Ok(v)
}

pub(super) fn parse(text: &str) -> Result<StepOutput, SyntaxError> {
    let mut cur = Cursor::new(text);
    cur.expect("<output>\n<thought>")?;
    let thought = read_text(&mut cur, false)?;
    cur.expect("</thought>\n<tool_calls>\n")?;
    let mut tool_calls = Vec::new();
    while cur.eat("<call") {
        let mut call = ToolCall::new(read_attr(&mut cur, "name")?);
        cur.expect(">\n")?;
        while cur.eat("<arg") {
            let name = read_attr(&mut cur, "name")?;
            let kind = read_kind(&mut cur)?;
            cur.expect(">")?;
            let v = read_value(&mut cur, kind, "</arg>")?;
            cur.expect("\n")?;
            call.arguments.push(name, v);
        }
        cur.expect("</call>\n")?;
        tool_calls.push(call);
    }
    cur.expect("</tool_calls>\n</output>")?;
    cur.expect_eof()?;
    Ok(StepOutput {
        thought,
        tool_calls,
    })
}
