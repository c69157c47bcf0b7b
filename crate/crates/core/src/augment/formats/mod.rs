//! The output-format catalog.
//!
//! Every [`FormatId`] has a writer ([`convert_output`]), a strict reader
//! ([`parse_output`]) and an instruction paragraph ([`format_instruction`]).
//! The reader is an exact inverse of the writer for every [`StepOutput`]:
//! thoughts may hold any Unicode text and argument values any [`Value`].
//! Grammars are documented per format in `docs/formats.md`.
//!
//! Writers never emit a trailing newline, and readers do not skip one.

mod calls;
mod json;
mod lines;
mod xml;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::literal::SyntaxError;
use crate::model::ToolCall;
#[cfg(doc)]
use crate::value::Value;

/// What one assistant turn produces: a thought and zero or more calls.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StepOutput {
    pub thought: String,
    pub tool_calls: Vec<ToolCall>,
}

impl StepOutput {
    pub fn new(thought: impl Into<String>, tool_calls: Vec<ToolCall>) -> Self {
        Self {
            thought: thought.into(),
            tool_calls,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatId {
    JsonCompact,
    JsonPretty,
    JsonFenced,
    Xml,
    Yaml,
    PlainKv,
    MarkdownList,
    PythonicCall,
    TaggedCall,
    TsvArgs,
    BulletedText,
    NumberedText,
    KeyEquals,
    BracketCall,
    YamlFlow,
}

impl FormatId {
    pub const ALL: [FormatId; 15] = [
        FormatId::JsonCompact,
        FormatId::JsonPretty,
        FormatId::JsonFenced,
        FormatId::Xml,
        FormatId::Yaml,
        FormatId::PlainKv,
        FormatId::MarkdownList,
        FormatId::PythonicCall,
        FormatId::TaggedCall,
        FormatId::TsvArgs,
        FormatId::BulletedText,
        FormatId::NumberedText,
        FormatId::KeyEquals,
        FormatId::BracketCall,
        FormatId::YamlFlow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FormatId::JsonCompact => "json_compact",
            FormatId::JsonPretty => "json_pretty",
            FormatId::JsonFenced => "json_fenced",
            FormatId::Xml => "xml",
            FormatId::Yaml => "yaml",
            FormatId::PlainKv => "plain_kv",
            FormatId::MarkdownList => "markdown_list",
            FormatId::PythonicCall => "pythonic_call",
            FormatId::TaggedCall => "tagged_call",
            FormatId::TsvArgs => "tsv_args",
            FormatId::BulletedText => "bulleted_text",
            FormatId::NumberedText => "numbered_text",
            FormatId::KeyEquals => "key_equals",
            FormatId::BracketCall => "bracket_call",
            FormatId::YamlFlow => "yaml_flow",
        }
    }

    /// Human-readable name used inside the instruction paragraph.
    fn label(self) -> &'static str {
        match self {
            FormatId::JsonCompact => "JSON",
            FormatId::JsonPretty => "indented JSON",
            FormatId::JsonFenced => "fenced JSON code block",
            FormatId::Xml => "XML",
            FormatId::Yaml => "YAML",
            FormatId::PlainKv => "plain key-value text",
            FormatId::MarkdownList => "Markdown list",
            FormatId::PythonicCall => "Python function call",
            FormatId::TaggedCall => "tagged tool call",
            FormatId::TsvArgs => "tab-separated values",
            FormatId::BulletedText => "bulleted plain text",
            FormatId::NumberedText => "numbered plain text",
            FormatId::KeyEquals => "key=value",
            FormatId::BracketCall => "bracketed function call list",
            FormatId::YamlFlow => "YAML flow-style",
        }
    }

    fn empty_hint(self) -> &'static str {
        match self {
            FormatId::JsonCompact
            | FormatId::JsonPretty
            | FormatId::JsonFenced
            | FormatId::Yaml
            | FormatId::YamlFlow => "please make tool_calls an empty list \"[]\"",
            FormatId::Xml => "please leave the <tool_calls> element empty",
            FormatId::PlainKv => "please write \"tool_calls: 0\" and no call lines",
            FormatId::MarkdownList => "please leave the \"**Tool calls:**\" list empty",
            FormatId::PythonicCall => "please write only the thought comment line",
            FormatId::TaggedCall => "please write no <tool_call> lines",
            FormatId::TsvArgs => "please write only the thought row",
            FormatId::BulletedText => "please write \"Tool calls: none\"",
            FormatId::NumberedText => "please write only the thought line",
            FormatId::KeyEquals => "please write only the thought line",
            FormatId::BracketCall => "please write an empty list \"[]\"",
        }
    }
}

impl fmt::Display for FormatId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown output format {0:?}")]
pub struct UnknownFormat(pub String);

impl FromStr for FormatId {
    type Err = UnknownFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FormatId::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| UnknownFormat(s.to_string()))
    }
}

/// A reader failure: the format, the byte offset and what was expected.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{format}: {message} at byte {offset}")]
pub struct FormatError {
    pub format: FormatId,
    pub offset: usize,
    pub message: String,
}

impl FormatError {
    fn from_syntax(format: FormatId, e: SyntaxError) -> Self {
        Self {
            format,
            offset: e.offset,
            message: e.message,
        }
    }
}

/// Encodes `out` in format `f`.
pub fn convert_output(out: &StepOutput, f: FormatId) -> String {
    match f {
        FormatId::JsonCompact => json::write_compact(out),
        FormatId::JsonPretty => json::write_pretty(out),
        FormatId::JsonFenced => json::write_fenced(out),
        FormatId::YamlFlow => json::write_flow(out),
        FormatId::TaggedCall => json::write_tagged(out),
        FormatId::Xml => xml::write(out),
        FormatId::Yaml => lines::write_yaml(out),
        FormatId::PlainKv => lines::write_plain_kv(out),
        FormatId::MarkdownList => lines::write_markdown(out),
        FormatId::TsvArgs => lines::write_tsv(out),
        FormatId::BulletedText => lines::write_bulleted(out),
        FormatId::KeyEquals => lines::write_key_equals(out),
        FormatId::PythonicCall => calls::write_pythonic(out),
        FormatId::NumberedText => calls::write_numbered(out),
        FormatId::BracketCall => calls::write_bracket(out),
    }
}

/// Decodes `text` as format `f`. Any deviation from the grammar is an
/// error; there are no partial results.
pub fn parse_output(text: &str, f: FormatId) -> Result<StepOutput, FormatError> {
    let result = match f {
        FormatId::JsonCompact | FormatId::JsonPretty => json::parse_plain(text),
        FormatId::JsonFenced => json::parse_fenced(text),
        FormatId::YamlFlow => json::parse_flow(text),
        FormatId::TaggedCall => json::parse_tagged(text),
        FormatId::Xml => xml::parse(text),
        FormatId::Yaml => lines::parse_yaml(text),
        FormatId::PlainKv => lines::parse_plain_kv(text),
        FormatId::MarkdownList => lines::parse_markdown(text),
        FormatId::TsvArgs => lines::parse_tsv(text),
        FormatId::BulletedText => lines::parse_bulleted(text),
        FormatId::KeyEquals => lines::parse_key_equals(text),
        FormatId::PythonicCall => calls::parse_pythonic(text),
        FormatId::NumberedText => calls::parse_numbered(text),
        FormatId::BracketCall => calls::parse_bracket(text),
    };
    result.map_err(|e| FormatError::from_syntax(f, e))
}

/// The worked example embedded in every instruction paragraph.
pub fn instruction_example() -> StepOutput {
    StepOutput::new(
        "the thought process, or an empty string",
        vec![ToolCall::new("api_name1")
            .arg("argument1", "value1")
            .arg("argument2", "value2")],
    )
}

/// Delimiter line around the worked example in instruction paragraphs.
pub const EXAMPLE_FENCE: &str = "\"\"\"";

/// The fixed instruction paragraph for `f`, with one worked example
/// between `"""` lines.
pub fn format_instruction(f: FormatId) -> String {
    format!(
        "Your output should be in the {label} format, which specifies a list of function calls. \
         The example format is as follows. Please make sure the parameter type is correct. \
         If no function call is needed, {hint}.\n{fence}\n{example}\n{fence}",
        label = f.label(),
        hint = f.empty_hint(),
        fence = EXAMPLE_FENCE,
        example = convert_output(&instruction_example(), f),
    )
}

/// Extracts the worked example from an instruction paragraph.
pub fn extract_instruction_example(instruction: &str) -> Option<&str> {
    let open = format!("\n{EXAMPLE_FENCE}\n");
    let start = instruction.find(&open)? + open.len();
    let close = format!("\n{EXAMPLE_FENCE}");
    let end = instruction.rfind(&close)?;
    (end >= start).then(|| &instruction[start..end])
}
