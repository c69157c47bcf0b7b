//! The unified trajectory schema.
//!
//! One [`Trajectory`] is one agent episode: the task instruction, optional
//! few-shot examples, the user query, the tools available to the agent and
//! the ordered interaction steps. On disk a trajectory is one JSON object
//! per line with the field names used below.
//!
//! Absent text fields, `null` text fields and empty strings are the same
//! thing: all three load as `""`. A parameter without `"required"` is
//! optional.

use std::collections::HashSet;
use std::fmt;

use serde::de::{self, Deserializer, IgnoredAny, MapAccess, SeqAccess, Visitor};
use serde::ser::{SerializeMap, SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

use crate::value::{OrderedMap, Value, ValueKind};

/// Declared type of a tool parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamType {
    String,
    Number,
    Integer,
    Boolean,
    Array,
    Object,
}

impl ParamType {
    pub const ALL: [ParamType; 6] = [
        ParamType::String,
        ParamType::Number,
        ParamType::Integer,
        ParamType::Boolean,
        ParamType::Array,
        ParamType::Object,
    ];

    pub fn as_str(self) -> &'static str {
        self.kind().as_str()
    }

    pub fn kind(self) -> ValueKind {
        match self {
            ParamType::String => ValueKind::String,
            ParamType::Number => ValueKind::Number,
            ParamType::Integer => ValueKind::Integer,
            ParamType::Boolean => ValueKind::Boolean,
            ParamType::Array => ValueKind::Array,
            ParamType::Object => ValueKind::Object,
        }
    }

    /// Whether a value of `kind` satisfies this declared type. Integers are
    /// accepted where numbers are declared.
    pub fn accepts(self, kind: ValueKind) -> bool {
        kind == self.kind() || (self == ParamType::Number && kind == ValueKind::Integer)
    }

    /// Parses a type name, accepting common aliases from source datasets
    /// (`str`, `int`, `float`, `bool`, `list`, `dict`, ...), case-insensitively.
    pub fn parse(name: &str) -> Option<ParamType> {
        Some(match name.trim().to_ascii_lowercase().as_str() {
            "string" | "str" | "text" => ParamType::String,
            "number" | "float" | "double" | "num" => ParamType::Number,
            "integer" | "int" | "long" => ParamType::Integer,
            "boolean" | "bool" => ParamType::Boolean,
            "array" | "list" | "tuple" => ParamType::Array,
            "object" | "dict" | "map" => ParamType::Object,
            _ => return None,
        })
    }
}

impl fmt::Display for ParamType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for ParamType {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for ParamType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        ParamType::parse(&name)
            .ok_or_else(|| de::Error::custom(format!("unknown parameter type {name:?}")))
    }
}

fn nullable_string<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    Ok(Option::<String>::deserialize(d)?.unwrap_or_default())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub value_type: ParamType,
    pub description: String,
    pub required: bool,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, value_type: ParamType, required: bool) -> Self {
        Self {
            name: name.into(),
            value_type,
            description: String::new(),
            required,
        }
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }
}

#[derive(Serialize, Deserialize)]
struct ParamBody {
    #[serde(rename = "type")]
    value_type: ParamType,
    #[serde(default, deserialize_with = "nullable_string")]
    description: String,
    #[serde(default)]
    required: bool,
}

/// One of the three keys of a tool record. The order in which they appear
/// is part of the model so that field-order shuffling is representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ToolField {
    Name,
    Description,
    Parameters,
}

impl ToolField {
    pub const DECLARED_ORDER: [ToolField; 3] =
        [ToolField::Name, ToolField::Description, ToolField::Parameters];

    pub fn key(self) -> &'static str {
        match self {
            ToolField::Name => "name",
            ToolField::Description => "description",
            ToolField::Parameters => "parameters",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    /// Parameters in declaration order.
    pub parameters: Vec<ParamSpec>,
    /// Serialization order of the tool's keys; always a permutation of
    /// [`ToolField::DECLARED_ORDER`].
    pub field_order: [ToolField; 3],
}

impl ToolSpec {
    pub fn new(name: impl Into<String>, description: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            parameters: Vec::new(),
            field_order: ToolField::DECLARED_ORDER,
        }
    }

    pub fn with_param(mut self, param: ParamSpec) -> Self {
        self.parameters.push(param);
        self
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// Value tree in `field_order`, as rendered in prompts.
    pub fn to_value(&self) -> Value {
        let mut map = OrderedMap::new();
        for field in self.field_order {
            let v = match field {
                ToolField::Name => Value::from(self.name.as_str()),
                ToolField::Description => Value::from(self.description.as_str()),
                ToolField::Parameters => Value::Object(
                    self.parameters
                        .iter()
                        .map(|p| {
                            let mut body = OrderedMap::new();
                            body.push("type", Value::from(p.value_type.as_str()));
                            body.push("description", Value::from(p.description.as_str()));
                            body.push("required", Value::Boolean(p.required));
                            (p.name.clone(), Value::Object(body))
                        })
                        .collect(),
                ),
            };
            map.push(field.key(), v);
        }
        Value::Object(map)
    }
}

struct Params<'a>(&'a [ParamSpec]);

impl Serialize for Params<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for p in self.0 {
            map.serialize_entry(
                &p.name,
                &ParamBody {
                    value_type: p.value_type,
                    description: p.description.clone(),
                    required: p.required,
                },
            )?;
        }
        map.end()
    }
}

struct ParamsSeed;

impl<'de> de::DeserializeSeed<'de> for ParamsSeed {
    type Value = Vec<ParamSpec>;

    fn deserialize<D: Deserializer<'de>>(self, d: D) -> Result<Self::Value, D::Error> {
        let map = Option::<OrderedMap<ParamBody>>::deserialize(d)?.unwrap_or_default();
        Ok(map
            .into_entries()
            .into_iter()
            .map(|(name, body)| ParamSpec {
                name,
                value_type: body.value_type,
                description: body.description,
                required: body.required,
            })
            .collect())
    }
}

impl Serialize for ToolSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(3))?;
        for field in self.field_order {
            match field {
                ToolField::Name => map.serialize_entry("name", &self.name)?,
                ToolField::Description => map.serialize_entry("description", &self.description)?,
                ToolField::Parameters => {
                    map.serialize_entry("parameters", &Params(&self.parameters))?
                }
            }
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for ToolSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct ToolVisitor;

        impl<'de> Visitor<'de> for ToolVisitor {
            type Value = ToolSpec;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a tool object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<ToolSpec, A::Error> {
                let mut name = None;
                let mut description = None;
                let mut parameters = None;
                let mut seen = Vec::with_capacity(3);
                while let Some(key) = access.next_key::<String>()? {
                    let field = match key.as_str() {
                        "name" => ToolField::Name,
                        "description" => ToolField::Description,
                        "parameters" => ToolField::Parameters,
                        _ => {
                            access.next_value::<IgnoredAny>()?;
                            continue;
                        }
                    };
                    if seen.contains(&field) {
                        return Err(de::Error::duplicate_field(field.key()));
                    }
                    seen.push(field);
                    match field {
                        ToolField::Name => {
                            name = Some(access.next_value::<Option<String>>()?.unwrap_or_default())
                        }
                        ToolField::Description => {
                            description =
                                Some(access.next_value::<Option<String>>()?.unwrap_or_default())
                        }
                        ToolField::Parameters => {
                            parameters = Some(access.next_value_seed(ParamsSeed)?)
                        }
                    }
                }
                for field in ToolField::DECLARED_ORDER {
                    if !seen.contains(&field) {
                        seen.push(field);
                    }
                }
                Ok(ToolSpec {
                    name: name.unwrap_or_default(),
                    description: description.unwrap_or_default(),
                    parameters: parameters.unwrap_or_default(),
                    field_order: [seen[0], seen[1], seen[2]],
                })
            }
        }

        d.deserialize_map(ToolVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    #[serde(default, deserialize_with = "nullable_string")]
    pub name: String,
    #[serde(default)]
    pub arguments: OrderedMap<Value>,
}

impl ToolCall {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            arguments: OrderedMap::new(),
        }
    }

    pub fn arg(mut self, name: impl Into<String>, value: impl Into<Value>) -> Self {
        self.arguments.push(name, value.into());
        self
    }

    pub fn to_value(&self) -> Value {
        let mut map = OrderedMap::new();
        map.push("name", Value::from(self.name.as_str()));
        map.push("arguments", Value::Object(self.arguments.clone()));
        Value::Object(map)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    #[serde(default, deserialize_with = "nullable_string")]
    pub thought: String,
    #[serde(default)]
    pub tool_calls: Vec<ToolCall>,
    pub step_id: i64,
    #[serde(default, deserialize_with = "nullable_string")]
    pub next_observation: String,
    #[serde(default, deserialize_with = "nullable_string")]
    pub user_input: String,
}

impl Step {
    pub fn new(step_id: i64) -> Self {
        Self {
            thought: String::new(),
            tool_calls: Vec::new(),
            step_id,
            next_observation: String::new(),
            user_input: String::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.thought.is_empty()
            && self.tool_calls.is_empty()
            && self.next_observation.is_empty()
            && self.user_input.is_empty()
    }

    pub fn to_value(&self) -> Value {
        let mut map = OrderedMap::new();
        map.push("thought", Value::from(self.thought.as_str()));
        map.push(
            "tool_calls",
            Value::Array(self.tool_calls.iter().map(ToolCall::to_value).collect()),
        );
        map.push("step_id", Value::Integer(self.step_id));
        map.push("next_observation", Value::from(self.next_observation.as_str()));
        map.push("user_input", Value::from(self.user_input.as_str()));
        Value::Object(map)
    }
}

fn count_nested<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
    struct CountVisitor;

    impl<'de> Visitor<'de> for CountVisitor {
        type Value = usize;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a list")
        }

        fn visit_unit<E>(self) -> Result<usize, E> {
            Ok(0)
        }

        fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<usize, A::Error> {
            let mut n = 0;
            while seq.next_element::<IgnoredAny>()?.is_some() {
                n += 1;
            }
            Ok(n)
        }
    }

    d.deserialize_any(CountVisitor)
}

/// A few-shot example: a trajectory without its own id or few-shot list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotExample {
    #[serde(default, deserialize_with = "nullable_string")]
    pub task_instruction: String,
    #[serde(default, deserialize_with = "nullable_string")]
    pub query: String,
    #[serde(default)]
    pub tools: Vec<ToolSpec>,
    #[serde(default)]
    pub steps: Vec<Step>,
    /// Number of few-shot examples nested inside this one in the source
    /// record. Nesting is not allowed and is reported by validation.
    #[serde(
        default,
        rename = "few_shot_examples",
        deserialize_with = "count_nested",
        skip_serializing
    )]
    pub nested_examples: usize,
}

impl FewShotExample {
    pub fn to_value(&self) -> Value {
        let mut map = OrderedMap::new();
        map.push("task_instruction", Value::from(self.task_instruction.as_str()));
        map.push("query", Value::from(self.query.as_str()));
        map.push(
            "tools",
            Value::Array(self.tools.iter().map(ToolSpec::to_value).collect()),
        );
        map.push(
            "steps",
            Value::Array(self.steps.iter().map(Step::to_value).collect()),
        );
        Value::Object(map)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Trajectory {
    #[serde(default, deserialize_with = "nullable_string")]
    pub unique_trajectory_id: String,
    #[serde(default, deserialize_with = "nullable_string")]
    pub task_instruction: String,
    #[serde(default)]
    pub few_shot_examples: Vec<FewShotExample>,
    #[serde(default, deserialize_with = "nullable_string")]
    pub query: String,
    #[serde(default)]
    pub tools: Vec<ToolSpec>,
    #[serde(default)]
    pub steps: Vec<Step>,
}

impl Serialize for Trajectory {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Trajectory", 6)?;
        st.serialize_field("unique_trajectory_id", &self.unique_trajectory_id)?;
        st.serialize_field("task_instruction", &self.task_instruction)?;
        st.serialize_field("few_shot_examples", &self.few_shot_examples)?;
        st.serialize_field("query", &self.query)?;
        st.serialize_field("tools", &self.tools)?;
        st.serialize_field("steps", &self.steps)?;
        st.end()
    }
}

impl Trajectory {
    pub fn new(id: impl Into<String>, query: impl Into<String>) -> Self {
        Self {
            unique_trajectory_id: id.into(),
            task_instruction: String::new(),
            few_shot_examples: Vec::new(),
            query: query.into(),
            tools: Vec::new(),
            steps: Vec::new(),
        }
    }

    pub fn tool(&self, name: &str) -> Option<&ToolSpec> {
        self.tools.iter().find(|t| t.name == name)
    }

    /// One corpus line (no trailing newline).
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trajectory serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Closed set of schema violation codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssueCode {
    /// A required text field (id, query, a name) is empty or absent.
    MissingField,
    /// Step ids are not exactly `1..=N` in order.
    BadStepId,
    /// Two parameters of one tool share a name.
    DupParam,
    /// Two arguments of one call share a name.
    DupArgument,
    /// A step with no thought, calls, observation or user input.
    EmptyStep,
    /// A few-shot example carries its own few-shot examples.
    NestedFewShot,
    /// Two trajectories of one corpus share an id.
    DupTrajectoryId,
}

impl IssueCode {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueCode::MissingField => "MISSING_FIELD",
            IssueCode::BadStepId => "BAD_STEP_ID",
            IssueCode::DupParam => "DUP_PARAM",
            IssueCode::DupArgument => "DUP_ARGUMENT",
            IssueCode::EmptyStep => "EMPTY_STEP",
            IssueCode::NestedFewShot => "NESTED_FEW_SHOT",
            IssueCode::DupTrajectoryId => "DUP_TRAJECTORY_ID",
        }
    }
}

impl fmt::Display for IssueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub code: IssueCode,
    pub path: String,
    pub detail: String,
}

impl ValidationIssue {
    fn new(code: IssueCode, path: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            code,
            path: path.into(),
            detail: detail.into(),
        }
    }
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.code, self.path, self.detail)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("trajectory is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<ValidationIssue>),
}

fn check_tools(tools: &[ToolSpec], prefix: &str, issues: &mut Vec<ValidationIssue>) {
    for (ti, tool) in tools.iter().enumerate() {
        let at = format!("{prefix}tools[{ti}]");
        if tool.name.is_empty() {
            issues.push(ValidationIssue::new(
                IssueCode::MissingField,
                format!("{at}.name"),
                "tool name is empty",
            ));
        }
        let mut seen = HashSet::new();
        for (pi, param) in tool.parameters.iter().enumerate() {
            if param.name.is_empty() {
                issues.push(ValidationIssue::new(
                    IssueCode::MissingField,
                    format!("{at}.parameters[{pi}]"),
                    "parameter name is empty",
                ));
            } else if !seen.insert(param.name.as_str()) {
                issues.push(ValidationIssue::new(
                    IssueCode::DupParam,
                    format!("{at}.parameters.{}", param.name),
                    format!("parameter {:?} declared more than once", param.name),
                ));
            }
        }
    }
}

fn check_steps(steps: &[Step], prefix: &str, issues: &mut Vec<ValidationIssue>) {
    for (si, step) in steps.iter().enumerate() {
        let at = format!("{prefix}steps[{si}]");
        let expected = si as i64 + 1;
        if step.step_id != expected {
            issues.push(ValidationIssue::new(
                IssueCode::BadStepId,
                format!("{at}.step_id"),
                format!("expected step_id {expected}, found {}", step.step_id),
            ));
        }
        if step.is_empty() {
            issues.push(ValidationIssue::new(
                IssueCode::EmptyStep,
                at.clone(),
                "step has no thought, tool calls, observation or user input",
            ));
        }
        for (ci, call) in step.tool_calls.iter().enumerate() {
            let call_at = format!("{at}.tool_calls[{ci}]");
            if call.name.is_empty() {
                issues.push(ValidationIssue::new(
                    IssueCode::MissingField,
                    format!("{call_at}.name"),
                    "tool call name is empty",
                ));
            }
            for (ai, key) in call.arguments.keys().enumerate() {
                if key.is_empty() {
                    issues.push(ValidationIssue::new(
                        IssueCode::MissingField,
                        format!("{call_at}.arguments[{ai}]"),
                        "argument name is empty",
                    ));
                }
            }
            for (_, key) in call.arguments.duplicate_keys() {
                issues.push(ValidationIssue::new(
                    IssueCode::DupArgument,
                    format!("{call_at}.arguments.{key}"),
                    format!("argument {key:?} passed more than once"),
                ));
            }
        }
    }
}

/// Checks every schema invariant of one trajectory. Issues come out in
/// document order.
pub fn validate_trajectory(t: &Trajectory) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    if t.unique_trajectory_id.is_empty() {
        issues.push(ValidationIssue::new(
            IssueCode::MissingField,
            "unique_trajectory_id",
            "trajectory id is empty",
        ));
    }
    for (i, ex) in t.few_shot_examples.iter().enumerate() {
        let prefix = format!("few_shot_examples[{i}].");
        if ex.nested_examples > 0 {
            issues.push(ValidationIssue::new(
                IssueCode::NestedFewShot,
                format!("few_shot_examples[{i}].few_shot_examples"),
                "few-shot examples may not nest further examples",
            ));
        }
        if ex.query.is_empty() {
            issues.push(ValidationIssue::new(
                IssueCode::MissingField,
                format!("{prefix}query"),
                "few-shot query is empty",
            ));
        }
        check_tools(&ex.tools, &prefix, &mut issues);
        check_steps(&ex.steps, &prefix, &mut issues);
    }
    if t.query.is_empty() {
        issues.push(ValidationIssue::new(
            IssueCode::MissingField,
            "query",
            "query is empty",
        ));
    }
    check_tools(&t.tools, "", &mut issues);
    check_steps(&t.steps, "", &mut issues);
    issues
}

/// Per-trajectory validation plus corpus-level id uniqueness. Issues are
/// paired with the index of the offending trajectory.
pub fn validate_corpus(corpus: &[Trajectory]) -> Vec<(usize, ValidationIssue)> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, t) in corpus.iter().enumerate() {
        out.extend(validate_trajectory(t).into_iter().map(|issue| (i, issue)));
        if !t.unique_trajectory_id.is_empty() && !ids.insert(t.unique_trajectory_id.as_str()) {
            out.push((
                i,
                ValidationIssue::new(
                    IssueCode::DupTrajectoryId,
                    "unique_trajectory_id",
                    format!("id {:?} already used", t.unique_trajectory_id),
                ),
            ));
        }
    }
    out
}

fn canonical_tools(tools: &mut [ToolSpec]) {
    for tool in tools {
        tool.field_order = ToolField::DECLARED_ORDER;
    }
}

/// Orders each call's arguments by the declaring tool's parameter order;
/// undeclared arguments follow in their original relative order.
fn canonical_calls(steps: &mut [Step], tools: &[ToolSpec]) {
    for step in steps {
        for call in &mut step.tool_calls {
            let Some(tool) = tools.iter().find(|t| t.name == call.name) else {
                continue;
            };
            let rank = |k: &str| {
                tool.parameters
                    .iter()
                    .position(|p| p.name == k)
                    .unwrap_or(usize::MAX)
            };
            // stable sort keeps undeclared arguments in place relative to each other
            call.arguments
                .entries_mut()
                .sort_by_key(|(k, _)| rank(k));
        }
    }
}

/// Normalizes every order-only degree of freedom: tool keys go back to
/// name/description/parameters and call arguments follow their tool's
/// parameter declaration order. Text is untouched.
pub fn canonicalize(t: &Trajectory) -> Result<Trajectory, ModelError> {
    let issues = validate_trajectory(t);
    if !issues.is_empty() {
        return Err(ModelError::Invalid(issues));
    }
    let mut out = t.clone();
    canonical_tools(&mut out.tools);
    canonical_calls(&mut out.steps, &t.tools);
    for ex in &mut out.few_shot_examples {
        canonical_tools(&mut ex.tools);
        let tools = ex.tools.clone();
        canonical_calls(&mut ex.steps, &tools);
    }
    Ok(out)
}
