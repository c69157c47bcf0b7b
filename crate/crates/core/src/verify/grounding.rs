//! Heuristic value grounding.
//!
//! A scalar argument value is grounded when its normalized form occurs in
//! the normalized context: the query, the task instruction, observations
//! and user inputs of earlier steps, and quoted values in parameter
//! descriptions.
//!
//! Normalization: lower-case, collapse runs of whitespace to one space;
//! values additionally lose leading and trailing punctuation. Numbers
//! (and numeric strings) match any numeric token in the context with the
//! same value, so `50`, `"50"` and `50.0` all match "50 miles".

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{coerce::parse_decimal, Finding, FindingCode};
use crate::model::{ToolCall, ToolSpec, Trajectory};
use crate::value::Value;

static NUMBER_TOKEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[0-9]+(?:\.[0-9]+)?").unwrap());
static QUOTED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#""([^"]+)"|`([^`]+)`"#).unwrap());

/// Everything a value may be grounded in.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundingContext {
    pub query: String,
    pub task_instruction: String,
    pub prior_observations: Vec<String>,
    pub prior_user_inputs: Vec<String>,
    pub enum_values: BTreeSet<String>,
}

impl GroundingContext {
    /// Context for the step at 0-based `step_index`: only steps before it
    /// contribute observations and user inputs.
    pub fn for_step(t: &Trajectory, step_index: usize) -> Self {
        let prior = &t.steps[..step_index.min(t.steps.len())];
        let mut enum_values = BTreeSet::new();
        for tool in &t.tools {
            collect_enum_values(tool, &mut enum_values);
        }
        Self {
            query: t.query.clone(),
            task_instruction: t.task_instruction.clone(),
            prior_observations: prior
                .iter()
                .map(|s| s.next_observation.clone())
                .filter(|s| !s.is_empty())
                .collect(),
            prior_user_inputs: prior
                .iter()
                .map(|s| s.user_input.clone())
                .filter(|s| !s.is_empty())
                .collect(),
            enum_values,
        }
    }

    fn texts(&self) -> impl Iterator<Item = &str> {
        [self.query.as_str(), self.task_instruction.as_str()]
            .into_iter()
            .chain(self.prior_observations.iter().map(String::as_str))
            .chain(self.prior_user_inputs.iter().map(String::as_str))
            .chain(self.enum_values.iter().map(String::as_str))
    }
}

/// Double-quoted or backquoted substrings of the parameter descriptions.
pub fn collect_enum_values(tool: &ToolSpec, into: &mut BTreeSet<String>) {
    for p in &tool.parameters {
        for c in QUOTED.captures_iter(&p.description) {
            if let Some(m) = c.get(1).or_else(|| c.get(2)) {
                into.insert(m.as_str().to_string());
            }
        }
    }
}

pub fn normalize_text(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn normalize_value(s: &str) -> String {
    normalize_text(s.trim_matches(|c: char| !c.is_alphanumeric()))
}

fn numeric_value(v: &Value) -> Option<f64> {
    match v {
        Value::Integer(_) | Value::Number(_) => v.as_f64(),
        Value::String(s) => parse_decimal(s.trim()).and_then(|n| n.as_f64()),
        _ => None,
    }
}

/// Prepared context: normalized texts and their numeric tokens.
struct Prepared {
    texts: Vec<String>,
    numbers: Vec<f64>,
}

impl Prepared {
    fn new(ctx: &GroundingContext) -> Self {
        let texts: Vec<String> = ctx.texts().map(normalize_text).collect();
        let numbers = texts
            .iter()
            .flat_map(|t| NUMBER_TOKEN.find_iter(t).filter_map(|m| m.as_str().parse().ok()))
            .collect();
        Self { texts, numbers }
    }

    fn grounds(&self, v: &Value) -> bool {
        if let Some(n) = numeric_value(v) {
            let n = n.abs();
            if self.numbers.contains(&n) {
                return true;
            }
        }
        let text = match v {
            Value::String(s) => normalize_value(s),
            Value::Integer(i) => i.to_string(),
            Value::Number(n) => normalize_value(&n.to_string()),
            _ => return true,
        };
        text.is_empty() || self.texts.iter().any(|t| t.contains(&text))
    }
}

/// Whether a single scalar value occurs in the context. Booleans and
/// empty strings always count as grounded.
pub fn is_grounded(v: &Value, ctx: &GroundingContext) -> bool {
    Prepared::new(ctx).grounds(v)
}

/// `VALUE_UNGROUNDED` for every scalar leaf of the call's arguments that
/// the context does not contain. Paths are relative to the call.
pub fn check_value_grounding(call: &ToolCall, ctx: &GroundingContext) -> Vec<Finding> {
    let prepared = Prepared::new(ctx);
    let mut findings = Vec::new();
    for (name, value) in call.arguments.iter() {
        value.for_each_leaf(&mut |sub, leaf| {
            if matches!(leaf, Value::Boolean(_)) || prepared.grounds(leaf) {
                return;
            }
            findings.push(Finding::new(
                FindingCode::ValueUngrounded,
                format!("arguments.{name}{sub}"),
                format!(
                    "value {} of {}.{name} does not occur in the query or earlier context",
                    crate::literal::compact(leaf),
                    call.name
                ),
            ));
        });
    }
    findings
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> GroundingContext {
        GroundingContext {
            query: "Can you give me the latest information on the wildfires occurring in California?".into(),
            prior_user_inputs: vec!["User: Let me think... 50 miles.".into()],
            ..Default::default()
        }
    }

    #[test]
    fn wildfire_values_are_grounded() {
        let call = ToolCall::new("get_fire_info").arg("location", "California").arg("radius", 50i64);
        assert!(check_value_grounding(&call, &ctx()).is_empty());
        let float = ToolCall::new("get_fire_info").arg("radius", 50.0);
        assert!(check_value_grounding(&float, &ctx()).is_empty());
        let text = ToolCall::new("get_fire_info").arg("radius", "50");
        assert!(check_value_grounding(&text, &ctx()).is_empty());
    }

    #[test]
    fn absent_value_is_flagged() {
        let call = ToolCall::new("get_fire_info").arg("location", "Nevada");
        let f = check_value_grounding(&call, &ctx());
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].path, "arguments.location");
        assert_eq!(f[0].severity, super::super::Severity::Suspect);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_value("  \"Palo   Alto,\" "), "palo alto");
        assert!(is_grounded(&Value::from("CALIFORNIA!"), &ctx()));
        assert!(is_grounded(&Value::from(""), &ctx()));
        assert!(is_grounded(&Value::Boolean(false), &ctx()));
        assert!(!is_grounded(&Value::Integer(51), &ctx()));
        assert!(!is_grounded(&Value::Number(50.5), &ctx()));
    }

    #[test]
    fn leaves_of_arrays_are_checked() {
        let call = ToolCall::new("f").arg(
            "places",
            Value::Array(vec!["California".into(), "Oregon".into()]),
        );
        let f = check_value_grounding(&call, &ctx());
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].path, "arguments.places[1]");
    }

    #[test]
    fn enum_values_come_from_descriptions() {
        let tool = ToolSpec::new("f", "").with_param(
            crate::model::ParamSpec::new("unit", crate::model::ParamType::String, false)
                .with_description("One of \"celsius\" or `fahrenheit`."),
        );
        let mut t = Trajectory::new("x", "weather?");
        t.tools.push(tool);
        let c = GroundingContext::for_step(&t, 0);
        assert!(c.enum_values.contains("celsius"));
        assert!(c.enum_values.contains("fahrenheit"));
        assert!(is_grounded(&Value::from("Fahrenheit"), &c));
    }
}
