//! Structural comparison of predicted and expected function calls.
//!
//! Calls are compared as trees, not as strings: names must be equal,
//! arguments are compared per parameter under a [`MatchPolicy`]. Sets of
//! calls (parallel categories) match when some one-to-one assignment of
//! predictions to expectations matches pairwise.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::augment::{parse_output, FormatId};
use crate::model::{ParamType, ToolCall, ToolSpec};
use crate::value::{Value, ValueKind};
use crate::verify::coerce;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Simple,
    Multiple,
    Parallel,
    ParallelMultiple,
    Relevance,
    Irrelevance,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Simple,
        Category::Multiple,
        Category::Parallel,
        Category::ParallelMultiple,
        Category::Relevance,
        Category::Irrelevance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Simple => "simple",
            Category::Multiple => "multiple",
            Category::Parallel => "parallel",
            Category::ParallelMultiple => "parallel_multiple",
            Category::Relevance => "relevance",
            Category::Irrelevance => "irrelevance",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchPolicy {
    /// Relative tolerance for numeric comparison.
    pub float_tolerance: f64,
    pub string_case_sensitive: bool,
    /// Coerce predicted values to the declared parameter type first.
    pub coerce_types: bool,
    /// Compare arrays as multisets.
    pub unordered_arrays: bool,
}

impl Default for MatchPolicy {
    fn default() -> Self {
        Self {
            float_tolerance: 1e-9,
            string_case_sensitive: true,
            coerce_types: true,
            unordered_arrays: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Reason {
    NameDiffers,
    UnknownTool,
    MissingRequired,
    UnexpectedArgument,
    TypeDiffers,
    ValueDiffers,
    LengthDiffers,
    KeysDiffer,
    CountDiffers,
    NoMatchingCall,
    NoAssignment,
    ParseFail,
    ExpectedNoCalls,
    ExpectedCalls,
    MissingPrediction,
    BadExpectation,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::NameDiffers => "NAME_DIFFERS",
            Reason::UnknownTool => "UNKNOWN_TOOL",
            Reason::MissingRequired => "MISSING_REQUIRED",
            Reason::UnexpectedArgument => "UNEXPECTED_ARGUMENT",
            Reason::TypeDiffers => "TYPE_DIFFERS",
            Reason::ValueDiffers => "VALUE_DIFFERS",
            Reason::LengthDiffers => "LENGTH_DIFFERS",
            Reason::KeysDiffer => "KEYS_DIFFER",
            Reason::CountDiffers => "COUNT_DIFFERS",
            Reason::NoMatchingCall => "NO_MATCHING_CALL",
            Reason::NoAssignment => "NO_ASSIGNMENT",
            Reason::ParseFail => "PARSE_FAIL",
            Reason::ExpectedNoCalls => "EXPECTED_NO_CALLS",
            Reason::ExpectedCalls => "EXPECTED_CALLS",
            Reason::MissingPrediction => "MISSING_PREDICTION",
            Reason::BadExpectation => "BAD_EXPECTATION",
        }
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub path: String,
    pub reason: Reason,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Mismatch {
    fn new(path: impl Into<String>, reason: Reason) -> Self {
        Self {
            path: path.into(),
            reason,
            detail: String::new(),
        }
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub matched: bool,
    pub mismatches: Vec<Mismatch>,
}

impl MatchResult {
    fn from_mismatches(mismatches: Vec<Mismatch>) -> Self {
        Self {
            matched: mismatches.is_empty(),
            mismatches,
        }
    }
}

fn numbers_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn param_type_of(kind: ValueKind) -> ParamType {
    match kind {
        ValueKind::String => ParamType::String,
        ValueKind::Number => ParamType::Number,
        ValueKind::Integer => ParamType::Integer,
        ValueKind::Boolean => ParamType::Boolean,
        ValueKind::Array => ParamType::Array,
        ValueKind::Object => ParamType::Object,
    }
}

fn is_numeric(v: &Value) -> bool {
    matches!(v, Value::Integer(_) | Value::Number(_))
}

/// Compares `pred` with `exp`, pushing mismatches at the deepest differing
/// node. `declared` is the parameter type at the top level.
fn compare(
    pred: &Value,
    exp: &Value,
    declared: Option<ParamType>,
    path: &str,
    policy: &MatchPolicy,
    out: &mut Vec<Mismatch>,
) {
    let coerced;
    let mut pred = pred;
    if policy.coerce_types && pred.kind() != exp.kind() && !(is_numeric(pred) && is_numeric(exp)) {
        let target = declared.unwrap_or_else(|| param_type_of(exp.kind()));
        if let Some(c) = coerce(pred, target) {
            coerced = c;
            pred = &coerced;
        }
    }
    match (pred, exp) {
        (p, e) if is_numeric(p) && is_numeric(e) => {
            let equal = match (p, e) {
                (Value::Integer(a), Value::Integer(b)) => a == b,
                _ => numbers_close(p.as_f64().unwrap(), e.as_f64().unwrap(), policy.float_tolerance),
            };
            if !equal {
                out.push(Mismatch::new(path, Reason::ValueDiffers));
            }
        }
        (Value::String(a), Value::String(b)) => {
            let equal = if policy.string_case_sensitive {
                a == b
            } else {
                a.to_lowercase() == b.to_lowercase()
            };
            if !equal {
                out.push(Mismatch::new(path, Reason::ValueDiffers));
            }
        }
        (Value::Boolean(a), Value::Boolean(b)) => {
            if a != b {
                out.push(Mismatch::new(path, Reason::ValueDiffers));
            }
        }
        (Value::Array(a), Value::Array(b)) => {
            if a.len() != b.len() {
                out.push(
                    Mismatch::new(path, Reason::LengthDiffers)
                        .with_detail(format!("{} vs {}", a.len(), b.len())),
                );
            } else if policy.unordered_arrays {
                let ok: Vec<Vec<bool>> = a
                    .iter()
                    .map(|x| {
                        b.iter()
                            .map(|y| {
                                let mut m = Vec::new();
                                compare(x, y, None, path, policy, &mut m);
                                m.is_empty()
                            })
                            .collect()
                    })
                    .collect();
                if !has_perfect_matching(&ok) {
                    out.push(Mismatch::new(path, Reason::ValueDiffers).with_detail("no element pairing"));
                }
            } else {
                for (i, (x, y)) in a.iter().zip(b).enumerate() {
                    compare(x, y, None, &format!("{path}[{i}]"), policy, out);
                }
            }
        }
        (Value::Object(a), Value::Object(b)) => {
            let mut ka: Vec<&str> = a.keys().collect();
            let mut kb: Vec<&str> = b.keys().collect();
            ka.sort_unstable();
            kb.sort_unstable();
            if ka != kb {
                out.push(Mismatch::new(path, Reason::KeysDiffer));
                return;
            }
            for (k, y) in b.iter() {
                let x = a.get(k).expect("same key sets");
                compare(x, y, None, &format!("{path}.{k}"), policy, out);
            }
        }
        (p, e) => out.push(
            Mismatch::new(path, Reason::TypeDiffers).with_detail(format!("{} vs {}", p.kind(), e.kind())),
        ),
    }
}

/// Compares one predicted call with one expected call.
///
/// An optional parameter present on only one side is not a mismatch; a
/// required one is. Arguments that the tool does not declare never match.
pub fn match_call(pred: &ToolCall, exp: &ToolCall, specs: &[ToolSpec], policy: &MatchPolicy) -> MatchResult {
    let mut out = Vec::new();
    if pred.name != exp.name {
        out.push(
            Mismatch::new("name", Reason::NameDiffers).with_detail(format!("{} vs {}", pred.name, exp.name)),
        );
        return MatchResult::from_mismatches(out);
    }
    let Some(spec) = specs.iter().find(|s| s.name == exp.name) else {
        out.push(Mismatch::new("name", Reason::UnknownTool).with_detail(exp.name.clone()));
        return MatchResult::from_mismatches(out);
    };
    for p in &spec.parameters {
        let path = format!("arguments.{}", p.name);
        match (pred.arguments.get(&p.name), exp.arguments.get(&p.name)) {
            (Some(a), Some(b)) => compare(a, b, Some(p.value_type), &path, policy, &mut out),
            (None, Some(_)) | (Some(_), None) if p.required => {
                out.push(Mismatch::new(path, Reason::MissingRequired))
            }
            _ => {}
        }
    }
    for name in pred.arguments.keys().chain(exp.arguments.keys()) {
        let path = format!("arguments.{name}");
        if spec.param(name).is_none() && !out.iter().any(|m| m.path == path) {
            out.push(Mismatch::new(path, Reason::UnexpectedArgument));
        }
    }
    MatchResult::from_mismatches(out)
}

/// Exhaustive assignment search, used for small sets.
fn backtrack(ok: &[Vec<bool>], row: usize, used: &mut [bool]) -> bool {
    if row == ok.len() {
        return true;
    }
    for j in 0..used.len() {
        if ok[row][j] && !used[j] {
            used[j] = true;
            if backtrack(ok, row + 1, used) {
                return true;
            }
            used[j] = false;
        }
    }
    false
}

/// Kuhn's augmenting-path search for one row.
fn augment(ok: &[Vec<bool>], row: usize, seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
    for j in 0..owner.len() {
        if ok[row][j] && !seen[j] {
            seen[j] = true;
            if owner[j].is_none_or(|r| augment(ok, r, seen, owner)) {
                owner[j] = Some(row);
                return true;
            }
        }
    }
    false
}

/// Whether the square compatibility matrix admits a perfect matching.
/// Exhaustive search up to 8 rows, maximum bipartite matching above.
pub fn has_perfect_matching(ok: &[Vec<bool>]) -> bool {
    let n = ok.len();
    if ok.iter().any(|r| r.len() != n) {
        return false;
    }
    if n <= 8 {
        return backtrack(ok, 0, &mut vec![false; n]);
    }
    let mut owner = vec![None; n];
    (0..n).all(|row| augment(ok, row, &mut vec![false; n], &mut owner))
}

/// Order-insensitive comparison of call lists where each expected slot
/// lists acceptable alternatives.
pub fn match_call_slots(
    preds: &[ToolCall],
    slots: &[Vec<ToolCall>],
    specs: &[ToolSpec],
    policy: &MatchPolicy,
) -> MatchResult {
    if preds.len() != slots.len() {
        return MatchResult::from_mismatches(vec![Mismatch::new("tool_calls", Reason::CountDiffers)
            .with_detail(format!("{} predicted, {} expected", preds.len(), slots.len()))]);
    }
    let ok: Vec<Vec<bool>> = preds
        .iter()
        .map(|p| {
            slots
                .iter()
                .map(|alts| alts.iter().any(|e| match_call(p, e, specs, policy).matched))
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for j in 0..slots.len() {
        if !ok.iter().any(|row| row[j]) {
            out.push(Mismatch::new(format!("tool_calls[{j}]"), Reason::NoMatchingCall));
        }
    }
    if out.is_empty() && !has_perfect_matching(&ok) {
        out.push(Mismatch::new("tool_calls", Reason::NoAssignment));
    }
    MatchResult::from_mismatches(out)
}

/// Order-insensitive comparison of call lists.
pub fn match_call_set(preds: &[ToolCall], exps: &[ToolCall], specs: &[ToolSpec], policy: &MatchPolicy) -> MatchResult {
    let slots: Vec<Vec<ToolCall>> = exps.iter().map(|e| vec![e.clone()]).collect();
    match_call_slots(preds, &slots, specs, policy)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Score {
    pub correct: bool,
    pub reasons: Vec<Mismatch>,
}

impl Score {
    fn from(result: MatchResult) -> Self {
        Self {
            correct: result.matched,
            reasons: result.mismatches,
        }
    }

    fn fail(m: Mismatch) -> Self {
        Self {
            correct: false,
            reasons: vec![m],
        }
    }
}

/// Parses a model answer in format `f` and scores it for `cat`. Never
/// fails; every failure mode is an incorrect score with a reason.
pub fn score_example(
    pred_text: &str,
    f: FormatId,
    exps: &[ToolCall],
    cat: Category,
    specs: &[ToolSpec],
    policy: &MatchPolicy,
) -> Score {
    let parsed = match parse_output(pred_text, f) {
        Ok(p) => p,
        Err(e) => return Score::fail(Mismatch::new("", Reason::ParseFail).with_detail(e.to_string())),
    };
    let calls = &parsed.tool_calls;
    match cat {
        Category::Simple | Category::Multiple => {
            if exps.len() != 1 {
                return Score::fail(
                    Mismatch::new("", Reason::BadExpectation)
                        .with_detail(format!("{cat} expects exactly one call, got {}", exps.len())),
                );
            }
            if calls.len() != 1 {
                return Score::fail(
                    Mismatch::new("tool_calls", Reason::CountDiffers)
                        .with_detail(format!("{} predicted, 1 expected", calls.len())),
                );
            }
            Score::from(match_call(&calls[0], &exps[0], specs, policy))
        }
        Category::Parallel | Category::ParallelMultiple => {
            Score::from(match_call_set(calls, exps, specs, policy))
        }
        Category::Irrelevance => {
            if calls.is_empty() {
                Score::from(MatchResult::from_mismatches(Vec::new()))
            } else {
                Score::fail(Mismatch::new("tool_calls", Reason::ExpectedNoCalls))
            }
        }
        Category::Relevance => {
            if calls.is_empty() {
                return Score::fail(Mismatch::new("tool_calls", Reason::ExpectedCalls));
            }
            let unknown: Vec<Mismatch> = calls
                .iter()
                .enumerate()
                .filter(|(_, c)| !specs.iter().any(|s| s.name == c.name))
                .map(|(i, c)| Mismatch::new(format!("tool_calls[{i}].name"), Reason::UnknownTool).with_detail(c.name.clone()))
                .collect();
            Score::from(MatchResult::from_mismatches(unknown))
        }
    }
}

/// One model answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub format: FormatId,
    pub text: String,
}

/// Ground truth for one example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub id: String,
    pub category: Category,
    #[serde(default)]
    pub expected: Vec<ToolCall>,
    #[serde(default)]
    pub tools: Vec<ToolSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleScore {
    pub id: String,
    pub category: Category,
    pub correct: bool,
    pub reasons: Vec<Mismatch>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
}

impl Accuracy {
    fn add(&mut self, correct: bool) {
        self.total += 1;
        self.correct += correct as usize;
        self.accuracy = self.correct as f64 / self.total as f64;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub overall: Accuracy,
    pub per_category: BTreeMap<Category, Accuracy>,
}

/// Scores every expectation against the prediction with the same id.
/// Expectations without a prediction count as incorrect.
pub fn score_corpus(
    preds: &[Prediction],
    exps: &[Expectation],
    policy: &MatchPolicy,
) -> (Vec<ExampleScore>, ScoreSummary) {
    let by_id: BTreeMap<&str, &Prediction> = preds.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut summary = ScoreSummary::default();
    let scores: Vec<ExampleScore> = exps
        .iter()
        .map(|e| {
            let score = match by_id.get(e.id.as_str()) {
                Some(p) => score_example(&p.text, p.format, &e.expected, e.category, &e.tools, policy),
                None => Score::fail(Mismatch::new("", Reason::MissingPrediction)),
            };
            summary.overall.add(score.correct);
            summary.per_category.entry(e.category).or_default().add(score.correct);
            ExampleScore {
                id: e.id.clone(),
                category: e.category,
                correct: score.correct,
                reasons: score.reasons,
            }
        })
        .collect();
    (scores, summary)
}
