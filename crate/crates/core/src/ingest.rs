//! Source adapters and corpus ingestion.
//!
//! An adapter turns one source record (one line of a JSON-lines file) into
//! a [`Trajectory`] or a [`ParseFailure`] with a byte offset into the
//! record. Three adapters are built in:
//!
//! - `unified`: the record already is a trajectory,
//! - `flat_call_pairs`: a query with one or more calls, e.g.
//!   `{"query": "...", "tools": [...], "call": "get_weather(\"Palo Alto\", \"today\")"}`,
//! - `chat_transcript`: role-tagged messages with assistant tool calls.
//!
//! Other formats plug in through the [`SourceAdapter`] trait.
//!
//! A corpus file may start with a header line
//! `{"corpus_header": {"version": 1, ...}}`; it is checked and skipped.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::literal::{Cursor, LiteralStyle};
use crate::model::{validate_trajectory, ParamSpec, ParamType, Step, ToolCall, ToolSpec, Trajectory};
use crate::rng::digest_hex;
use crate::value::{OrderedMap, Value};

/// Corpus header version understood by this crate.
pub const CORPUS_VERSION: i64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceAdapterId {
    #[default]
    Unified,
    FlatCallPairs,
    ChatTranscript,
}

impl SourceAdapterId {
    pub const ALL: [SourceAdapterId; 3] = [
        SourceAdapterId::Unified,
        SourceAdapterId::FlatCallPairs,
        SourceAdapterId::ChatTranscript,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceAdapterId::Unified => "unified",
            SourceAdapterId::FlatCallPairs => "flat_call_pairs",
            SourceAdapterId::ChatTranscript => "chat_transcript",
        }
    }

    pub fn adapter(self) -> &'static dyn SourceAdapter {
        match self {
            SourceAdapterId::Unified => &UnifiedAdapter,
            SourceAdapterId::FlatCallPairs => &FlatCallPairsAdapter,
            SourceAdapterId::ChatTranscript => &ChatTranscriptAdapter,
        }
    }
}

impl fmt::Display for SourceAdapterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown adapter {0:?} (expected unified, flat_call_pairs or chat_transcript)")]
pub struct UnknownAdapter(pub String);

impl FromStr for SourceAdapterId {
    type Err = UnknownAdapter;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SourceAdapterId::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| UnknownAdapter(s.to_string()))
    }
}

/// Why a record was rejected. `code` is `MALFORMED` for syntax errors,
/// `BAD_SHAPE` for well-formed records that do not map, a validation
/// issue code otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{code} at byte {offset}: {reason}")]
pub struct ParseFailure {
    pub offset: usize,
    pub code: String,
    pub reason: String,
}

impl ParseFailure {
    pub fn new(offset: usize, code: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            offset,
            code: code.into(),
            reason: reason.into(),
        }
    }

    fn shape(reason: impl Into<String>) -> Self {
        Self::new(0, "BAD_SHAPE", reason)
    }
}

/// Maps one source record to a trajectory.
pub trait SourceAdapter: Sync {
    fn parse(&self, record: &str) -> Result<Trajectory, ParseFailure>;
}

fn json_offset(text: &str, e: &serde_json::Error) -> usize {
    if e.is_eof() || e.line() == 0 {
        return text.len();
    }
    let start: usize = text.split_inclusive('\n').take(e.line() - 1).map(str::len).sum();
    (start + e.column().saturating_sub(1)).min(text.len())
}

fn parse_json(text: &str) -> Result<Json, ParseFailure> {
    serde_json::from_str(text).map_err(|e| {
        let code = if e.is_syntax() || e.is_eof() { "MALFORMED" } else { "BAD_SHAPE" };
        ParseFailure::new(json_offset(text, &e), code, e.to_string())
    })
}

fn from_json<T: serde::de::DeserializeOwned>(v: Json, what: &str) -> Result<T, ParseFailure> {
    serde_json::from_value(v).map_err(|e| ParseFailure::shape(format!("{what}: {e}")))
}

fn checked(t: Trajectory) -> Result<Trajectory, ParseFailure> {
    match validate_trajectory(&t).into_iter().next() {
        None => Ok(t),
        Some(issue) => Err(ParseFailure::new(0, issue.code.as_str(), format!("{} ({})", issue.detail, issue.path))),
    }
}

/// Parses one record with one of the built-in adapters.
pub fn parse_record(bytes: &[u8], adapter: SourceAdapterId) -> Result<Trajectory, ParseFailure> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| ParseFailure::new(e.valid_up_to(), "MALFORMED", "invalid UTF-8"))?;
    adapter.adapter().parse(text)
}

pub struct UnifiedAdapter;

impl SourceAdapter for UnifiedAdapter {
    fn parse(&self, record: &str) -> Result<Trajectory, ParseFailure> {
        let json = parse_json(record)?;
        checked(from_json(json, "trajectory")?)
    }
}

/// Tool list that accepts both the unified shape and JSON-schema style
/// parameters (`{"type": "object", "properties": {...}, "required": [...]}`).
fn parse_tools(v: Option<&Json>) -> Result<Vec<ToolSpec>, ParseFailure> {
    let Some(v) = v else { return Ok(Vec::new()) };
    let Json::Array(items) = v else {
        return Err(ParseFailure::shape("tools must be a list"));
    };
    items.iter().map(parse_tool).collect()
}

fn parse_tool(v: &Json) -> Result<ToolSpec, ParseFailure> {
    let schema = v
        .get("parameters")
        .filter(|p| p.get("properties").is_some_and(Json::is_object));
    let Some(schema) = schema else {
        return from_json(v.clone(), "tool");
    };
    let name = v.get("name").and_then(Json::as_str).unwrap_or_default();
    let description = v.get("description").and_then(Json::as_str).unwrap_or_default();
    let required: HashSet<&str> = schema
        .get("required")
        .and_then(Json::as_array)
        .map(|r| r.iter().filter_map(Json::as_str).collect())
        .unwrap_or_default();
    let mut tool = ToolSpec::new(name, description);
    let props = schema["properties"].as_object().expect("checked above");
    for (pname, p) in props {
        let ty = p.get("type").and_then(Json::as_str).unwrap_or("string");
        let value_type = ParamType::parse(ty)
            .ok_or_else(|| ParseFailure::shape(format!("parameter {pname} has unknown type {ty:?}")))?;
        let desc = p.get("description").and_then(Json::as_str).unwrap_or_default();
        tool.parameters.push(
            ParamSpec::new(pname.clone(), value_type, required.contains(pname.as_str())).with_description(desc),
        );
    }
    Ok(tool)
}

fn to_value(v: &Json) -> Result<Value, ParseFailure> {
    from_json(v.clone(), "argument value")
}

fn string_field(v: &Json, key: &str) -> Result<String, ParseFailure> {
    match v.get(key) {
        None | Some(Json::Null) => Ok(String::new()),
        Some(Json::String(s)) => Ok(s.clone()),
        Some(_) => Err(ParseFailure::shape(format!("{key} must be a string"))),
    }
}

/// Id from the record's `id` field, or a digest of the record text.
fn record_id(v: &Json, record: &str, prefix: &str) -> String {
    match v.get("id") {
        Some(Json::String(s)) if !s.is_empty() => s.clone(),
        Some(Json::Number(n)) => n.to_string(),
        _ => format!("{prefix}-{}", digest_hex(record.as_bytes())),
    }
}

/// Builds a call from a name and arguments that are either named (object)
/// or positional (list, assigned to the tool's parameters in order).
fn build_call(name: &str, args: Option<&Json>, tools: &[ToolSpec]) -> Result<ToolCall, ParseFailure> {
    let mut call = ToolCall::new(name);
    match args {
        None | Some(Json::Null) => {}
        Some(Json::Object(map)) => {
            for (k, v) in map {
                call.arguments.push(k.clone(), to_value(v)?);
            }
        }
        Some(Json::Array(items)) => {
            let values = items.iter().map(to_value).collect::<Result<Vec<_>, _>>()?;
            call.arguments = positional(name, values, tools)?;
        }
        Some(Json::String(s)) => {
            let parsed = parse_json(s).map_err(|e| ParseFailure::shape(format!("arguments of {name}: {}", e.reason)))?;
            return build_call(name, Some(&parsed), tools);
        }
        Some(_) => return Err(ParseFailure::shape(format!("arguments of {name} must be an object or list"))),
    }
    Ok(call)
}

fn positional(name: &str, values: Vec<Value>, tools: &[ToolSpec]) -> Result<OrderedMap<Value>, ParseFailure> {
    let tool = tools
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| ParseFailure::shape(format!("positional arguments need a declared tool {name}")))?;
    if values.len() > tool.parameters.len() {
        return Err(ParseFailure::shape(format!(
            "{name} takes {} argument(s), {} given",
            tool.parameters.len(),
            values.len()
        )));
    }
    Ok(tool
        .parameters
        .iter()
        .zip(values)
        .map(|(p, v)| (p.name.clone(), v))
        .collect())
}

/// Parses `name(arg, ..., key=value, ...)` with JSON literals (Python
/// `True`/`False` also accepted). Positional arguments map onto the
/// tool's parameters in order.
pub fn parse_call_expression(text: &str, tools: &[ToolSpec]) -> Result<ToolCall, ParseFailure> {
    let err = |e: crate::literal::SyntaxError| ParseFailure::new(e.offset, "MALFORMED", e.message);
    let mut cur = Cursor::new(text);
    cur.skip_ws();
    let name = cur.parse_identifier().map_err(err)?.to_string();
    cur.skip_ws();
    cur.expect("(").map_err(err)?;
    let mut named = OrderedMap::new();
    let mut positional_values = Vec::new();
    cur.skip_ws();
    if !cur.eat(")") {
        loop {
            cur.skip_ws();
            let mut probe = cur.clone();
            let keyword = probe.parse_identifier().ok().map(str::to_string).filter(|_| {
                probe.skip_ws();
                probe.eat("=")
            });
            if let Some(key) = keyword {
                probe.skip_ws();
                cur = probe;
                named.push(key, parse_literal(&mut cur).map_err(err)?);
            } else if named.is_empty() {
                positional_values.push(parse_literal(&mut cur).map_err(err)?);
            } else {
                return Err(ParseFailure::new(cur.pos(), "MALFORMED", "positional argument after keyword argument"));
            }
            cur.skip_ws();
            if cur.eat(")") {
                break;
            }
            cur.expect(",").map_err(err)?;
        }
    }
    cur.skip_ws();
    cur.expect_eof().map_err(err)?;
    let mut call = ToolCall::new(name.clone());
    if !positional_values.is_empty() {
        call.arguments = positional(&name, positional_values, tools)?;
    }
    for (k, v) in named.into_entries() {
        call.arguments.push(k, v);
    }
    Ok(call)
}

fn parse_literal(cur: &mut Cursor) -> Result<Value, crate::literal::SyntaxError> {
    let style = if cur.starts_with("True") || cur.starts_with("False") {
        LiteralStyle::PYTHON
    } else {
        LiteralStyle::JSON
    };
    cur.parse_value(style)
}

fn parse_call(v: &Json, tools: &[ToolSpec]) -> Result<ToolCall, ParseFailure> {
    match v {
        Json::String(s) => parse_call_expression(s, tools)
            .map_err(|e| ParseFailure::new(0, e.code, format!("call {s:?}: {}", e.reason))),
        Json::Object(_) => {
            let f = v.get("function").unwrap_or(v);
            let name = f
                .get("name")
                .and_then(Json::as_str)
                .ok_or_else(|| ParseFailure::shape("call without a name"))?;
            build_call(name, f.get("arguments"), tools)
        }
        _ => Err(ParseFailure::shape("call must be a string or an object")),
    }
}

/// `{"id"?, "task_instruction"?, "query", "tools"?, "call" | "calls", "answer"?}`.
/// One step with the calls and an empty thought; `answer`, when present,
/// becomes the step's observation.
pub struct FlatCallPairsAdapter;

impl SourceAdapter for FlatCallPairsAdapter {
    fn parse(&self, record: &str) -> Result<Trajectory, ParseFailure> {
        let v = parse_json(record)?;
        if !v.is_object() {
            return Err(ParseFailure::shape("record must be an object"));
        }
        let tools = parse_tools(v.get("tools"))?;
        let calls: Vec<&Json> = match (v.get("call"), v.get("calls")) {
            (Some(c), None) => vec![c],
            (None, Some(Json::Array(cs))) => cs.iter().collect(),
            (None, Some(_)) => return Err(ParseFailure::shape("calls must be a list")),
            (Some(_), Some(_)) => return Err(ParseFailure::shape("record has both call and calls")),
            (None, None) => return Err(ParseFailure::shape("record has no call")),
        };
        let mut t = Trajectory::new(record_id(&v, record, "flat"), string_field(&v, "query")?);
        t.task_instruction = string_field(&v, "task_instruction")?;
        let mut step = Step::new(1);
        step.tool_calls = calls.into_iter().map(|c| parse_call(c, &tools)).collect::<Result<_, _>>()?;
        step.next_observation = string_field(&v, "answer")?;
        t.tools = tools;
        t.steps.push(step);
        checked(t)
    }
}

/// `{"id"?, "tools"?, "messages": [{"role", "content", "tool_calls"?}]}`.
///
/// The first user message is the query (later user messages before the
/// first assistant turn are appended to it). Each assistant message opens
/// a step: its content is the thought, its `tool_calls` the calls. Tool
/// messages become the current step's observation and user messages its
/// user input, joined with newlines. A system message sets the task
/// instruction.
pub struct ChatTranscriptAdapter;

impl SourceAdapter for ChatTranscriptAdapter {
    fn parse(&self, record: &str) -> Result<Trajectory, ParseFailure> {
        let v = parse_json(record)?;
        let tools = parse_tools(v.get("tools"))?;
        let Some(Json::Array(messages)) = v.get("messages") else {
            return Err(ParseFailure::shape("record has no messages list"));
        };
        let mut t = Trajectory::new(record_id(&v, record, "chat"), "");
        let append = |s: &mut String, text: &str| {
            if !s.is_empty() {
                s.push('\n');
            }
            s.push_str(text);
        };
        for (i, m) in messages.iter().enumerate() {
            let role = m.get("role").and_then(Json::as_str).unwrap_or_default();
            let content = string_field(m, "content")
                .map_err(|e| ParseFailure::shape(format!("messages[{i}]: {}", e.reason)))?;
            match (role, t.steps.last_mut()) {
                ("system", _) => append(&mut t.task_instruction, &content),
                ("user", None) => append(&mut t.query, &content),
                ("user", Some(step)) => append(&mut step.user_input, &content),
                ("tool" | "function" | "observation", Some(step)) => append(&mut step.next_observation, &content),
                ("tool" | "function" | "observation", None) => {
                    return Err(ParseFailure::shape(format!("messages[{i}]: tool output before any assistant turn")))
                }
                ("assistant", _) => {
                    let mut step = Step::new(t.steps.len() as i64 + 1);
                    step.thought = content;
                    if let Some(calls) = m.get("tool_calls").filter(|c| !c.is_null()) {
                        let Json::Array(calls) = calls else {
                            return Err(ParseFailure::shape(format!("messages[{i}].tool_calls must be a list")));
                        };
                        step.tool_calls = calls.iter().map(|c| parse_call(c, &tools)).collect::<Result<_, _>>()?;
                    }
                    t.steps.push(step);
                }
                (other, _) => return Err(ParseFailure::shape(format!("messages[{i}]: unknown role {other:?}"))),
            }
        }
        t.tools = tools;
        checked(t)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub total: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub issues_by_code: BTreeMap<String, usize>,
    /// (1-based line number, reason) per rejected record.
    pub rejected_ids: Vec<(usize, String)>,
}

impl IngestReport {
    fn reject(&mut self, line: usize, f: &ParseFailure) {
        self.rejected += 1;
        *self.issues_by_code.entry(f.code.clone()).or_default() += 1;
        self.rejected_ids.push((line, f.to_string()));
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {failure}")]
    Aborted { line: usize, failure: ParseFailure },
    #[error("line 1: unsupported corpus header: {0}")]
    Header(String),
}

#[derive(Deserialize)]
struct HeaderLine {
    corpus_header: Json,
}

fn check_header(line: &str) -> Result<bool, IngestError> {
    let Ok(h) = serde_json::from_str::<HeaderLine>(line) else {
        return Ok(false);
    };
    match h.corpus_header.get("version").and_then(Json::as_i64) {
        Some(CORPUS_VERSION) | None => Ok(true),
        Some(v) => Err(IngestError::Header(format!("version {v}, expected {CORPUS_VERSION}"))),
    }
}

/// Reads a JSON-lines file with a built-in adapter.
pub fn ingest_corpus(
    path: &Path,
    adapter: SourceAdapterId,
    strict: bool,
) -> Result<(Vec<Trajectory>, IngestReport), IngestError> {
    ingest_corpus_with(path, adapter.adapter(), strict)
}

/// Reads a JSON-lines file with any adapter. Blank lines and a leading
/// header line are skipped. Records are parsed in parallel; results and
/// the report follow input order. A repeated trajectory id rejects the
/// later record.
pub fn ingest_corpus_with(
    path: &Path,
    adapter: &dyn SourceAdapter,
    strict: bool,
) -> Result<(Vec<Trajectory>, IngestReport), IngestError> {
    let bytes = std::fs::read(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ingest_bytes(&bytes, adapter, strict)
}

pub fn ingest_bytes(
    bytes: &[u8],
    adapter: &dyn SourceAdapter,
    strict: bool,
) -> Result<(Vec<Trajectory>, IngestReport), IngestError> {
    let mut lines: Vec<(usize, &[u8])> = bytes
        .split(|&b| b == b'\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix(b"\r").unwrap_or(l)))
        .filter(|(_, l)| !l.iter().all(u8::is_ascii_whitespace))
        .collect();
    if let Some(&(1, first)) = lines.first() {
        if std::str::from_utf8(first).is_ok_and(|s| s.contains("\"corpus_header\"")) && check_header(std::str::from_utf8(first).unwrap())? {
            lines.remove(0);
        }
    }

    let parse = |line: &[u8]| -> Result<Trajectory, ParseFailure> {
        let text = std::str::from_utf8(line)
            .map_err(|e| ParseFailure::new(e.valid_up_to(), "MALFORMED", "invalid UTF-8"))?;
        adapter.parse(text)
    };
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(8);
    let chunk = lines.len().div_ceil(workers).max(1);
    let results: Vec<Result<Trajectory, ParseFailure>> = std::thread::scope(|scope| {
        let handles: Vec<_> = lines
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|(_, l)| parse(l)).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("ingest worker panicked"))
            .collect()
    });

    let mut report = IngestReport::default();
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for ((line, _), result) in lines.iter().zip(results) {
        report.total += 1;
        let result = result.and_then(|t| {
            if seen.insert(t.unique_trajectory_id.clone()) {
                Ok(t)
            } else {
                Err(ParseFailure::new(
                    0,
                    "DUP_TRAJECTORY_ID",
                    format!("trajectory id {:?} already seen", t.unique_trajectory_id),
                ))
            }
        });
        match result {
            Ok(t) => {
                report.accepted += 1;
                out.push(t);
            }
            Err(failure) if strict => return Err(IngestError::Aborted { line: *line, failure }),
            Err(failure) => report.reject(*line, &failure),
        }
    }
    Ok((out, report))
}

/// Writes trajectories as a JSON-lines corpus with a header line.
pub fn write_corpus(path: &Path, corpus: &[Trajectory]) -> std::io::Result<()> {
    let mut text = format!("{{\"corpus_header\": {{\"version\": {CORPUS_VERSION}}}}}\n");
    for t in corpus {
        text.push_str(&t.to_json_line());
        text.push('\n');
    }
    std::fs::write(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const WILDFIRE: &str = r#"{"unique_trajectory_id": "wildfire", "task_instruction": "", "few_shot_examples": [], "query": "Can you give me the latest information on the wildfires occurring in California?", "tools": [{"name": "get_fire_info", "description": "Query the latest wildfire information", "parameters": {"location": {"type": "string", "description": "Location of the wildfire.", "required": true}, "radius": {"type": "number", "description": "The radius (in miles) around the location.", "required": false}}}], "steps": [{"thought": "Sure, what is the radius (in miles) around the location of the wildfire?", "tool_calls": [], "step_id": 1, "next_observation": "", "user_input": "User: Let me think... 50 miles."}, {"thought": "", "tool_calls": [{"name": "get_fire_info", "arguments": {"location": "California", "radius": 50}}], "step_id": 2, "next_observation": "", "user_input": ""}]}"#;

    const WEATHER_TOOL: &str = r#"{"name": "get_weather", "description": "Current weather", "parameters": {"type": "object", "properties": {"location": {"type": "string"}, "date": {"type": "string"}}, "required": ["location", "date"]}}"#;

    #[test]
    fn unified_record() {
        let t = parse_record(WILDFIRE.as_bytes(), SourceAdapterId::Unified).unwrap();
        assert_eq!(t.tools.len(), 1);
        assert_eq!(t.steps.len(), 2);
        assert!(t.steps[0].tool_calls.is_empty());
        assert_eq!(t.steps[1].tool_calls[0].name, "get_fire_info");
    }

    #[test]
    fn truncated_and_trailing() {
        let cut = &WILDFIRE[..WILDFIRE.len() - 3];
        let e = parse_record(cut.as_bytes(), SourceAdapterId::Unified).unwrap_err();
        assert_eq!((e.code.as_str(), e.offset), ("MALFORMED", cut.len()));
        let extra = format!("{WILDFIRE} x");
        let e = parse_record(extra.as_bytes(), SourceAdapterId::Unified).unwrap_err();
        assert_eq!(e.offset, WILDFIRE.len() + 1);
        let e = parse_record(b"{\"query\": \xff}", SourceAdapterId::Unified).unwrap_err();
        assert_eq!(e.offset, 10);
    }

    #[test]
    fn invalid_unified_record() {
        let bad = WILDFIRE.replace("\"step_id\": 2", "\"step_id\": 3");
        let e = parse_record(bad.as_bytes(), SourceAdapterId::Unified).unwrap_err();
        assert_eq!(e.code, "BAD_STEP_ID");
    }

    #[test]
    fn flat_pair_positional() {
        let rec = format!(
            r#"{{"query": "What is the weather in Palo Alto today?", "tools": [{WEATHER_TOOL}], "call": "get_weather(\"Palo Alto\", \"today\")"}}"#
        );
        let t = parse_record(rec.as_bytes(), SourceAdapterId::FlatCallPairs).unwrap();
        assert_eq!(t.steps.len(), 1);
        let s = &t.steps[0];
        assert_eq!((s.step_id, s.thought.as_str(), s.next_observation.as_str()), (1, "", ""));
        assert_eq!(
            s.tool_calls,
            [ToolCall::new("get_weather").arg("location", "Palo Alto").arg("date", "today")]
        );
        assert!(t.tools[0].param("date").unwrap().required);
    }

    #[test]
    fn flat_pair_object_calls() {
        let rec = format!(
            r#"{{"id": "w1", "query": "Weather in Paris and Rome?", "tools": [{WEATHER_TOOL}], "calls": [{{"name": "get_weather", "arguments": {{"location": "Paris", "date": "today"}}}}, {{"name": "get_weather", "arguments": ["Rome", "today"]}}]}}"#
        );
        let t = parse_record(rec.as_bytes(), SourceAdapterId::FlatCallPairs).unwrap();
        assert_eq!(t.unique_trajectory_id, "w1");
        assert_eq!(t.steps[0].tool_calls[1].arguments.get("location"), Some(&Value::from("Rome")));
    }

    #[test]
    fn call_expressions() {
        let tools = vec![ToolSpec::new("f", "")
            .with_param(ParamSpec::new("a", ParamType::Integer, true))
            .with_param(ParamSpec::new("b", ParamType::Boolean, false))];
        let c = parse_call_expression("f(1, b=True)", &tools).unwrap();
        assert_eq!(c, ToolCall::new("f").arg("a", 1i64).arg("b", true));
        assert!(parse_call_expression("f(a=1, 2)", &tools).is_err());
        assert!(parse_call_expression("f(1, 2, 3)", &tools).is_err());
        assert_eq!(parse_call_expression("f(1", &tools).unwrap_err().offset, 3);
    }

    #[test]
    fn chat_transcript() {
        let rec = r#"{"id": "c1", "tools": [{"name": "get_fire_info", "description": "", "parameters": {"location": {"type": "string", "required": true}, "radius": {"type": "number"}}}], "messages": [
            {"role": "system", "content": "Be helpful."},
            {"role": "user", "content": "Wildfires in California?"},
            {"role": "assistant", "content": "What radius?"},
            {"role": "user", "content": "50 miles."},
            {"role": "assistant", "content": "", "tool_calls": [{"type": "function", "function": {"name": "get_fire_info", "arguments": "{\"location\": \"California\", \"radius\": 50}"}}]},
            {"role": "tool", "content": "2 fires"}]}"#;
        let t = parse_record(rec.as_bytes(), SourceAdapterId::ChatTranscript).unwrap();
        assert_eq!(t.task_instruction, "Be helpful.");
        assert_eq!(t.query, "Wildfires in California?");
        assert_eq!(t.steps.len(), 2);
        assert_eq!(t.steps[0].user_input, "50 miles.");
        assert_eq!(t.steps[1].next_observation, "2 fires");
        assert_eq!(
            t.steps[1].tool_calls,
            [ToolCall::new("get_fire_info").arg("location", "California").arg("radius", 50i64)]
        );
    }

    #[test]
    fn corpus_counting_and_abort() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let other = WILDFIRE.replace("\"wildfire\"", "\"wildfire-2\"");
        std::fs::write(&path, format!("{WILDFIRE}\n{{\"broken\": \n{other}\n")).unwrap();
        let (ts, report) = ingest_corpus(&path, SourceAdapterId::Unified, false).unwrap();
        assert_eq!(ts.len(), 2);
        assert_eq!((report.total, report.accepted, report.rejected), (3, 2, 1));
        assert_eq!(report.rejected_ids[0].0, 2);
        assert_eq!(report.issues_by_code["MALFORMED"], 1);
        match ingest_corpus(&path, SourceAdapterId::Unified, true) {
            Err(IngestError::Aborted { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn header_empty_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("e.jsonl");
        std::fs::write(&empty, "").unwrap();
        let (ts, report) = ingest_corpus(&empty, SourceAdapterId::Unified, true).unwrap();
        assert!(ts.is_empty());
        assert_eq!(report, IngestReport::default());

        let path = dir.path().join("h.jsonl");
        let t = parse_record(WILDFIRE.as_bytes(), SourceAdapterId::Unified).unwrap();
        write_corpus(&path, &[t.clone(), t.clone()]).unwrap();
        let (ts, report) = ingest_corpus(&path, SourceAdapterId::Unified, false).unwrap();
        assert_eq!(ts, [t]);
        assert_eq!(report.issues_by_code["DUP_TRAJECTORY_ID"], 1);
        assert_eq!(report.rejected_ids[0].0, 3);

        std::fs::write(&path, "{\"corpus_header\": {\"version\": 2}}\n").unwrap();
        assert!(matches!(
            ingest_corpus(&path, SourceAdapterId::Unified, false),
            Err(IngestError::Header(_))
        ));
        assert!(matches!(
            ingest_corpus(&dir.path().join("missing"), SourceAdapterId::Unified, false),
            Err(IngestError::Io { .. })
        ));
    }
}
