//! Line-oriented formats: `yaml`, `plain_kv`, `markdown_list`, `tsv_args`,
//! `bulleted_text` and `key_equals`.
//!
//! Except for `tsv_args`, thoughts are JSON string literals, names are bare
//! identifiers or JSON strings, and argument values are compact JSON
//! literals, so every line stays single-line whatever the payload.

use std::fmt::Write as _;

use super::StepOutput;
use crate::literal::{self, Cursor, LiteralStyle, SyntaxError};
use crate::model::ToolCall;
use crate::value::{Value, ValueKind};

fn value_text(out: &mut String, v: &Value) {
    literal::write_compact(out, v, LiteralStyle::JSON);
}

fn parse_value(cur: &mut Cursor) -> Result<Value, SyntaxError> {
    cur.parse_value(LiteralStyle::JSON)
}

fn parse_count(cur: &mut Cursor) -> Result<usize, SyntaxError> {
    let at = cur.pos();
    let digits: String = cur.rest().chars().take_while(char::is_ascii_digit).collect();
    if digits.is_empty() || (digits.len() > 1 && digits.starts_with('0')) {
        return Err(SyntaxError::new(at, "expected a decimal count"));
    }
    cur.eat(&digits);
    digits
        .parse()
        .map_err(|_| SyntaxError::new(at, "count out of range"))
}

fn is_yaml_reserved(s: &str) -> bool {
    matches!(
        s.to_ascii_lowercase().as_str(),
        "true" | "false" | "null" | "yes" | "no" | "on" | "off" | "y" | "n"
    )
}

fn write_yaml_name(out: &mut String, name: &str) {
    if literal::is_identifier(name) && !is_yaml_reserved(name) {
        out.push_str(name);
    } else {
        literal::write_string(out, name);
    }
}

// yaml ---------------------------------------------------------------------

pub(super) fn write_yaml(step: &StepOutput) -> String {
    let mut out = String::from("thought: ");
    literal::write_string(&mut out, &step.thought);
    if step.tool_calls.is_empty() {
        out.push_str("\ntool_calls: []");
        return out;
    }
    out.push_str("\ntool_calls:");
    for call in &step.tool_calls {
        out.push_str("\n  - name: ");
        write_yaml_name(&mut out, &call.name);
        out.push_str("\n    arguments:");
        if call.arguments.is_empty() {
            out.push_str(" {}");
        }
        for (k, v) in call.arguments.iter() {
            out.push_str("\n      ");
            write_yaml_name(&mut out, k);
            out.push_str(": ");
            value_text(&mut out, v);
        }
    }
    out
}

pub(super) fn parse_yaml(text: &str) -> Result<StepOutput, SyntaxError> {
    let mut cur = Cursor::new(text);
    cur.expect("thought: ")?;
    let thought = cur.parse_string()?;
    cur.expect("\ntool_calls:")?;
    let mut tool_calls = Vec::new();
    if !cur.eat(" []") {
        loop {
            cur.expect("\n  - name: ")?;
            let mut call = ToolCall::new(cur.parse_name()?);
            cur.expect("\n    arguments:")?;
            if !cur.eat(" {}") {
                loop {
                    cur.expect("\n      ")?;
                    let key = cur.parse_name()?;
                    cur.expect(": ")?;
                    call.arguments.push(key, parse_value(&mut cur)?);
                    if !cur.starts_with("\n      ") {
                        break;
                    }
                }
            }
            tool_calls.push(call);
            if cur.is_eof() {
                break;
            }
        }
    }
    cur.expect_eof()?;
    Ok(StepOutput {
        thought,
        tool_calls,
    })
}

// plain_kv -----------------------------------------------------------------

pub(super) fn write_plain_kv(step: &StepOutput) -> String {
    let mut out = String::from("thought: ");
    literal::write_string(&mut out, &step.thought);
    let _ = write!(out, "\ntool_calls: {}", step.tool_calls.len());
    for call in &step.tool_calls {
        out.push_str("\nname: ");
        literal::write_name(&mut out, &call.name);
        out.push_str("\narguments: ");
        literal::write_compact_object(&mut out, &call.arguments, LiteralStyle::JSON);
    }
    out
}

pub(super) fn parse_plain_kv(text: &str) -> Result<StepOutput, SyntaxError> {
    let mut cur = Cursor::new(text);
    cur.expect("thought: ")?;
    let thought = cur.parse_string()?;
    cur.expect("\ntool_calls: ")?;
    let count = parse_count(&mut cur)?;
    let mut tool_calls = Vec::new();
    for _ in 0..count {
        cur.expect("\nname: ")?;
        let name = cur.parse_name()?;
        cur.expect("\narguments: ")?;
        let arguments = cur.parse_object(LiteralStyle::JSON)?;
        tool_calls.push(ToolCall { name, arguments });
    }
    cur.expect_eof()?;
    Ok(StepOutput {
        thought,
        tool_calls,
    })
}

// markdown_list ------------------------------------------------------------

pub(super) fn write_markdown(step: &StepOutput) -> String {
    let mut out = String::from("**Thought:** ");
    literal::write_string(&mut out, &step.thought);
    out.push_str("\n**Tool calls:**");
    for call in &step.tool_calls {
        out.push_str("\n- `");
        literal::write_name(&mut out, &call.name);
        out.push('`');
        for (k, v) in call.arguments.iter() {
            out.push_str("\n  - ");
            literal::write_name(&mut out, k);
            out.push_str(": ");
            value_text(&mut out, v);
        }
    }
    out
}

pub(super) fn parse_markdown(text: &str) -> Result<StepOutput, SyntaxError> {
    let mut cur = Cursor::new(text);
    cur.expect("**Thought:** ")?;
    let thought = cur.parse_string()?;
    cur.expect("\n**Tool calls:**")?;
    let mut tool_calls = Vec::new();
    while cur.eat("\n- `") {
        let mut call = ToolCall::new(cur.parse_name()?);
        cur.expect("`")?;
        while cur.eat("\n  - ") {
            let key = cur.parse_name()?;
            cur.expect(": ")?;
            call.arguments.push(key, parse_value(&mut cur)?);
        }
        tool_calls.push(call);
    }
    cur.expect_eof()?;
    Ok(StepOutput {
        thought,
        tool_calls,
    })
}

// tsv_args -----------------------------------------------------------------

fn tsv_escape(out: &mut String, s: &str) {
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
}

/// Reads one field up to a tab, newline or end of input, undoing
/// [`tsv_escape`].
fn tsv_field(cur: &mut Cursor) -> Result<String, SyntaxError> {
    let mut out = String::new();
    while let Some(c) = cur.peek() {
        match c {
            '\t' | '\n' => break,
            '\r' => return Err(cur.error("raw carriage return in field")),
            '\\' => {
                let at = cur.pos();
                cur.bump();
                out.push(match cur.bump() {
                    Some('\\') => '\\',
                    Some('t') => '\t',
                    Some('n') => '\n',
                    Some('r') => '\r',
                    _ => return Err(SyntaxError::new(at, "invalid escape")),
                });
            }
            c => {
                cur.bump();
                out.push(c);
            }
        }
    }
    Ok(out)
}

pub(super) fn write_tsv(step: &StepOutput) -> String {
    let mut out = String::from("thought\t");
    tsv_escape(&mut out, &step.thought);
    for call in &step.tool_calls {
        out.push_str("\ncall\t");
        tsv_escape(&mut out, &call.name);
        for (k, v) in call.arguments.iter() {
            out.push_str("\narg\t");
            tsv_escape(&mut out, k);
            let _ = write!(out, "\t{}\t", v.kind());
            match v {
                Value::String(s) => tsv_escape(&mut out, s),
                other => value_text(&mut out, other),
            }
        }
    }
    out
}

fn tsv_kind(cur: &mut Cursor) -> Result<ValueKind, SyntaxError> {
    let at = cur.pos();
    let name = tsv_field(cur)?;
    Ok(match name.as_str() {
        "string" => ValueKind::String,
        "number" => ValueKind::Number,
        "integer" => ValueKind::Integer,
        "boolean" => ValueKind::Boolean,
        "array" => ValueKind::Array,
        "object" => ValueKind::Object,
        _ => return Err(SyntaxError::new(at, "unknown value type")),
    })
}

pub(super) fn parse_tsv(text: &str) -> Result<StepOutput, SyntaxError> {
    let mut cur = Cursor::new(text);
    cur.expect("thought\t")?;
    let thought = tsv_field(&mut cur)?;
    let mut tool_calls: Vec<ToolCall> = Vec::new();
    while cur.eat("\n") {
        if cur.eat("call\t") {
            tool_calls.push(ToolCall::new(tsv_field(&mut cur)?));
        } else if cur.starts_with("arg\t") {
            let at = cur.pos();
            let Some(call) = tool_calls.last_mut() else {
                return Err(SyntaxError::new(at, "argument row before any call row"));
            };
            cur.expect("arg\t")?;
            let key = tsv_field(&mut cur)?;
            cur.expect("\t")?;
            let kind = tsv_kind(&mut cur)?;
            cur.expect("\t")?;
            let value = if kind == ValueKind::String {
                Value::String(tsv_field(&mut cur)?)
            } else {
                let vat = cur.pos();
                let v = parse_value(&mut cur)?;
                if v.kind() != kind {
                    return Err(SyntaxError::new(vat, format!("expected {kind} value")));
                }
                v
            };
            call.arguments.push(key, value);
        } else {
            return Err(cur.error("expected a call or arg row"));
        }
        if !cur.is_eof() && !cur.starts_with("\n") {
            return Err(cur.error("expected end of row"));
        }
    }
    cur.expect_eof()?;
    Ok(StepOutput {
        thought,
        tool_calls,
    })
}

// bulleted_text ------------------------------------------------------------

pub(super) fn write_bulleted(step: &StepOutput) -> String {
    let mut out = String::from("Thought: ");
    literal::write_string(&mut out, &step.thought);
    if step.tool_calls.is_empty() {
        out.push_str("\nTool calls: none");
        return out;
    }
    out.push_str("\nTool calls:");
    for call in &step.tool_calls {
        out.push_str("\n* ");
        literal::write_name(&mut out, &call.name);
        for (k, v) in call.arguments.iter() {
            out.push_str("\n  * ");
            literal::write_name(&mut out, k);
            out.push_str(" = ");
            value_text(&mut out, v);
        }
    }
    out
}

pub(super) fn parse_bulleted(text: &str) -> Result<StepOutput, SyntaxError> {
    let mut cur = Cursor::new(text);
    cur.expect("Thought: ")?;
    let thought = cur.parse_string()?;
    cur.expect("\nTool calls:")?;
    let mut tool_calls = Vec::new();
    if !cur.eat(" none") {
        loop {
            cur.expect("\n* ")?;
            let mut call = ToolCall::new(cur.parse_name()?);
            while cur.eat("\n  * ") {
                let key = cur.parse_name()?;
                cur.expect(" = ")?;
                call.arguments.push(key, parse_value(&mut cur)?);
            }
            tool_calls.push(call);
            if cur.is_eof() {
                break;
            }
        }
    }
    cur.expect_eof()?;
    Ok(StepOutput {
        thought,
        tool_calls,
    })
}

// key_equals ---------------------------------------------------------------

pub(super) fn write_key_equals(step: &StepOutput) -> String {
    let mut out = String::from("thought=");
    literal::write_string(&mut out, &step.thought);
    for (i, call) in step.tool_calls.iter().enumerate() {
        let _ = write!(out, "\ntool_calls.{i}.name=");
        literal::write_name(&mut out, &call.name);
        for (k, v) in call.arguments.iter() {
            let _ = write!(out, "\ntool_calls.{i}.arguments.");
            literal::write_name(&mut out, k);
            out.push('=');
            value_text(&mut out, v);
        }
    }
    out
}

pub(super) fn parse_key_equals(text: &str) -> Result<StepOutput, SyntaxError> {
    let mut cur = Cursor::new(text);
    cur.expect("thought=")?;
    let thought = cur.parse_string()?;
    let mut tool_calls: Vec<ToolCall> = Vec::new();
    while cur.eat("\ntool_calls.") {
        let at = cur.pos();
        let index = parse_count(&mut cur)?;
        if index == tool_calls.len() {
            cur.expect(".name=")?;
            tool_calls.push(ToolCall::new(cur.parse_name()?));
        } else if index + 1 == tool_calls.len() {
            cur.expect(".arguments.")?;
            let key = cur.parse_name()?;
            cur.expect("=")?;
            let v = parse_value(&mut cur)?;
            tool_calls[index].arguments.push(key, v);
        } else {
            return Err(SyntaxError::new(at, "call index out of sequence"));
        }
    }
    cur.expect_eof()?;
    Ok(StepOutput {
        thought,
        tool_calls,
    })
}
