//! Formats built directly on JSON-style literals: `json_compact`,
//! `json_pretty`, `json_fenced`, `yaml_flow` and `tagged_call`.

use super::StepOutput;
use crate::literal::{self, Cursor, LiteralStyle, SyntaxError};
use crate::model::ToolCall;
use crate::value::{OrderedMap, Value};

fn to_value(out: &StepOutput) -> Value {
    let mut map = OrderedMap::new();
    map.push("thought", Value::from(out.thought.as_str()));
    map.push(
        "tool_calls",
        Value::Array(out.tool_calls.iter().map(ToolCall::to_value).collect()),
    );
    Value::Object(map)
}

pub(super) fn write_compact(out: &StepOutput) -> String {
    let mut s = String::new();
    literal::write_compact(&mut s, &to_value(out), LiteralStyle::JSON);
    s
}

pub(super) fn write_pretty(out: &StepOutput) -> String {
    literal::pretty(&to_value(out))
}

pub(super) fn write_fenced(out: &StepOutput) -> String {
    format!("```json\n{}\n```", write_compact(out))
}

pub(super) fn write_flow(out: &StepOutput) -> String {
    let mut s = String::new();
    literal::write_compact(&mut s, &to_value(out), LiteralStyle::FLOW);
    s
}

pub(super) fn write_tagged(out: &StepOutput) -> String {
    let mut s = String::from("<thought>");
    literal::write_string(&mut s, &out.thought);
    s.push_str("</thought>");
    for call in &out.tool_calls {
        s.push_str("\n<tool_call>");
        literal::write_compact(&mut s, &call.to_value(), LiteralStyle::JSON);
        s.push_str("</tool_call>");
    }
    s
}

fn parse_key(cur: &mut Cursor, style: LiteralStyle) -> Result<(usize, String), SyntaxError> {
    let at = cur.pos();
    let key = if cur.peek() == Some('"') || !style.bare_keys {
        cur.parse_string()?
    } else {
        cur.parse_identifier()?.to_string()
    };
    Ok((at, key))
}

/// Walks `{ key: value, ... }`, handing each key to `field`.
fn parse_fields(
    cur: &mut Cursor,
    style: LiteralStyle,
    mut field: impl FnMut(&mut Cursor, usize, &str) -> Result<(), SyntaxError>,
) -> Result<(), SyntaxError> {
    cur.expect("{")?;
    cur.skip_ws();
    if cur.eat("}") {
        return Ok(());
    }
    loop {
        cur.skip_ws();
        let (at, key) = parse_key(cur, style)?;
        cur.skip_ws();
        cur.expect(":")?;
        cur.skip_ws();
        field(cur, at, &key)?;
        cur.skip_ws();
        if cur.eat("}") {
            return Ok(());
        }
        cur.expect(",")?;
    }
}

fn once<T>(slot: &mut Option<T>, at: usize, key: &str, v: T) -> Result<(), SyntaxError> {
    if slot.is_some() {
        return Err(SyntaxError::new(at, format!("duplicate key {key:?}")));
    }
    *slot = Some(v);
    Ok(())
}

pub(super) fn parse_call(cur: &mut Cursor, style: LiteralStyle) -> Result<ToolCall, SyntaxError> {
    let start = cur.pos();
    let mut name = None;
    let mut arguments = None;
    parse_fields(cur, style, |cur, at, key| match key {
        "name" => {
            let v = cur.parse_string()?;
            once(&mut name, at, key, v)
        }
        "arguments" => {
            let v = cur.parse_object(style)?;
            once(&mut arguments, at, key, v)
        }
        _ => Err(SyntaxError::new(at, format!("unexpected key {key:?} in tool call"))),
    })?;
    Ok(ToolCall {
        name: name.ok_or_else(|| SyntaxError::new(start, "tool call without \"name\""))?,
        arguments: arguments.unwrap_or_default(),
    })
}

fn parse_step_output(cur: &mut Cursor, style: LiteralStyle) -> Result<StepOutput, SyntaxError> {
    let start = cur.pos();
    let mut thought = None;
    let mut calls = None;
    parse_fields(cur, style, |cur, at, key| match key {
        "thought" => {
            let v = cur.parse_string()?;
            once(&mut thought, at, key, v)
        }
        "tool_calls" => {
            cur.expect("[")?;
            let mut list = Vec::new();
            cur.skip_ws();
            if !cur.eat("]") {
                loop {
                    cur.skip_ws();
                    list.push(parse_call(cur, style)?);
                    cur.skip_ws();
                    if cur.eat("]") {
                        break;
                    }
                    cur.expect(",")?;
                }
            }
            once(&mut calls, at, key, list)
        }
        _ => Err(SyntaxError::new(at, format!("unexpected key {key:?}"))),
    })?;
    Ok(StepOutput {
        thought: thought.unwrap_or_default(),
        tool_calls: calls.ok_or_else(|| SyntaxError::new(start, "missing \"tool_calls\""))?,
    })
}

fn parse_whole(text: &str, style: LiteralStyle) -> Result<StepOutput, SyntaxError> {
    let mut cur = Cursor::new(text);
    cur.skip_ws();
    let out = parse_step_output(&mut cur, style)?;
    cur.skip_ws();
    cur.expect_eof()?;
    Ok(out)
}

pub(super) fn parse_plain(text: &str) -> Result<StepOutput, SyntaxError> {
    parse_whole(text, LiteralStyle::JSON)
}

pub(super) fn parse_flow(text: &str) -> Result<StepOutput, SyntaxError> {
    parse_whole(text, LiteralStyle::FLOW)
}

pub(super) fn parse_fenced(text: &str) -> Result<StepOutput, SyntaxError> {
    let mut cur = Cursor::new(text);
    cur.expect("```json\n")?;
    let out = parse_step_output(&mut cur, LiteralStyle::JSON)?;
    cur.expect("\n```")?;
    cur.expect_eof()?;
    Ok(out)
}

pub(super) fn parse_tagged(text: &str) -> Result<StepOutput, SyntaxError> {
    let mut cur = Cursor::new(text);
    cur.expect("<thought>")?;
    let thought = cur.parse_string()?;
    cur.expect("</thought>")?;
    let mut tool_calls = Vec::new();
    while !cur.is_eof() {
        cur.expect("\n<tool_call>")?;
        tool_calls.push(parse_call(&mut cur, LiteralStyle::JSON)?);
        cur.expect("</tool_call>")?;
    }
    Ok(StepOutput {
        thought,
        tool_calls,
    })
}
