//! Call-expression formats: `pythonic_call`, `numbered_text` and
//! `bracket_call`. A call is written `NAME(KEY<sep>VALUE, ...)`.

use std::fmt::Write as _;

use super::StepOutput;
use crate::literal::{self, Cursor, LiteralStyle, SyntaxError};
use crate::model::ToolCall;

fn write_call(out: &mut String, call: &ToolCall, sep: &str, style: LiteralStyle) {
    literal::write_name(out, &call.name);
    out.push('(');
    for (i, (k, v)) in call.arguments.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        literal::write_name(out, k);
        out.push_str(sep);
        literal::write_compact(out, v, style);
    }
    out.push(')');
}

fn parse_call(cur: &mut Cursor, sep: &str, style: LiteralStyle) -> Result<ToolCall, SyntaxError> {
    let mut call = ToolCall::new(cur.parse_name()?);
    cur.expect("(")?;
    if cur.eat(")") {
        return Ok(call);
    }
    loop {
        let key = cur.parse_name()?;
        cur.expect(sep)?;
        call.arguments.push(key, cur.parse_value(style)?);
        if cur.eat(")") {
            return Ok(call);
        }
        cur.expect(", ")?;
    }
}

pub(super) fn write_pythonic(step: &StepOutput) -> String {
    let mut out = String::from("# thought: ");
    literal::write_string(&mut out, &step.thought);
    for call in &step.tool_calls {
        out.push('\n');
        write_call(&mut out, call, "=", LiteralStyle::PYTHON);
    }
    out
}

pub(super) fn parse_pythonic(text: &str) -> Result<StepOutput, SyntaxError> {
    let mut cur = Cursor::new(text);
    cur.expect("# thought: ")?;
    let thought = cur.parse_string()?;
    let mut tool_calls = Vec::new();
    while cur.eat("\n") {
        tool_calls.push(parse_call(&mut cur, "=", LiteralStyle::PYTHON)?);
    }
    cur.expect_eof()?;
    Ok(StepOutput {
        thought,
        tool_calls,
    })
}

pub(super) fn write_numbered(step: &StepOutput) -> String {
    let mut out = String::from("Thought: ");
    literal::write_string(&mut out, &step.thought);
    for (i, call) in step.tool_calls.iter().enumerate() {
        let _ = write!(out, "\n{}. ", i + 1);
        write_call(&mut out, call, ": ", LiteralStyle::JSON);
    }
    out
}

pub(super) fn parse_numbered(text: &str) -> Result<StepOutput, SyntaxError> {
    let mut cur = Cursor::new(text);
    cur.expect("Thought: ")?;
    let thought = cur.parse_string()?;
    let mut tool_calls = Vec::new();
    while cur.eat("\n") {
        cur.expect(&format!("{}. ", tool_calls.len() + 1))?;
        tool_calls.push(parse_call(&mut cur, ": ", LiteralStyle::JSON)?);
    }
    cur.expect_eof()?;
    Ok(StepOutput {
        thought,
        tool_calls,
    })
}

pub(super) fn write_bracket(step: &StepOutput) -> String {
    let mut out = String::from("Thought: ");
    literal::write_string(&mut out, &step.thought);
    out.push_str("\n[");
    for (i, call) in step.tool_calls.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_call(&mut out, call, "=", LiteralStyle::JSON);
    }
    out.push(']');
    out
}

pub(super) fn parse_bracket(text: &str) -> Result<StepOutput, SyntaxError> {
    let mut cur = Cursor::new(text);
    cur.expect("Thought: ")?;
    let thought = cur.parse_string()?;
    cur.expect("\n[")?;
    let mut tool_calls = Vec::new();
    if !cur.eat("]") {
        loop {
            tool_calls.push(parse_call(&mut cur, "=", LiteralStyle::JSON)?);
            if cur.eat("]") {
                break;
            }
            cur.expect(", ")?;
        }
    }
    cur.expect_eof()?;
    Ok(StepOutput {
        thought,
        tool_calls,
    })
}
