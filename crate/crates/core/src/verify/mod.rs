//! Rule-based trajectory verification.
//!
//! Every call in every step goes through the checks in a fixed order:
//! names, arguments, types (with optional repair), grounding, then the
//! trajectory-wide repetition check and, when a sandbox is given,
//! execution. Findings carry a stable code, a severity and a path such as
//! `steps[1].tool_calls[0].arguments.radius`.

mod coerce;
mod grounding;
mod repetition;
mod sandbox;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use coerce::{coerce, parse_decimal};
pub use grounding::{
    check_value_grounding, collect_enum_values, is_grounded, normalize_text, normalize_value,
    GroundingContext,
};
pub use repetition::{
    check_repetition, max_ngram_count, DEFAULT_MAX_DUP_STEPS, DEFAULT_MAX_NGRAM_REPEAT,
};
pub use sandbox::{
    execute_in_sandbox, Constraint, DeclaredStub, RegistryError, SandboxRegistry, Stub,
};

use crate::judge::{templates, Decision, JudgeClient, JudgeError, JudgeKind, JudgeRequest};
use crate::model::{ToolCall, ToolSpec, Trajectory};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FindingCode {
    UndefinedFunction,
    UndefinedArgument,
    ArgTypeMismatch,
    NameHallucination,
    ValueUngrounded,
    MissingRequiredArg,
    RepetitiveContent,
    ExecFailure,
}

impl FindingCode {
    pub const ALL: [FindingCode; 8] = [
        FindingCode::UndefinedFunction,
        FindingCode::UndefinedArgument,
        FindingCode::ArgTypeMismatch,
        FindingCode::NameHallucination,
        FindingCode::ValueUngrounded,
        FindingCode::MissingRequiredArg,
        FindingCode::RepetitiveContent,
        FindingCode::ExecFailure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FindingCode::UndefinedFunction => "UNDEFINED_FUNCTION",
            FindingCode::UndefinedArgument => "UNDEFINED_ARGUMENT",
            FindingCode::ArgTypeMismatch => "ARG_TYPE_MISMATCH",
            FindingCode::NameHallucination => "NAME_HALLUCINATION",
            FindingCode::ValueUngrounded => "VALUE_UNGROUNDED",
            FindingCode::MissingRequiredArg => "MISSING_REQUIRED_ARG",
            FindingCode::RepetitiveContent => "REPETITIVE_CONTENT",
            FindingCode::ExecFailure => "EXEC_FAILURE",
        }
    }

    pub fn severity(self) -> Severity {
        match self {
            FindingCode::ValueUngrounded | FindingCode::RepetitiveContent => Severity::Suspect,
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for FindingCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Severity {
    Error,
    Suspect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub code: FindingCode,
    pub severity: Severity,
    pub step_id: i64,
    pub path: String,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repair: Option<ToolCall>,
}

impl Finding {
    /// A finding with the code's severity, step 0 and no repair.
    pub fn new(code: FindingCode, path: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            code,
            severity: code.severity(),
            step_id: 0,
            path: path.into(),
            detail: detail.into(),
            repair: None,
        }
    }

    pub fn at_step(mut self, step_id: i64) -> Self {
        self.step_id = step_id;
        self
    }

    /// Prepends `prefix` to the path.
    pub fn under(mut self, prefix: &str) -> Self {
        self.path = if self.path.is_empty() {
            prefix.to_string()
        } else {
            format!("{prefix}.{}", self.path)
        };
        self
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} at {}: {}", self.code, self.step_id, self.path, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub trajectory_id: String,
    pub clean: bool,
    pub findings: Vec<Finding>,
}

impl DiagnosticReport {
    pub fn new(trajectory_id: impl Into<String>, mut findings: Vec<Finding>) -> Self {
        findings.sort_by(|a, b| (a.step_id, &a.path, a.code).cmp(&(b.step_id, &b.path, b.code)));
        Self {
            trajectory_id: trajectory_id.into(),
            clean: !findings.iter().any(|f| f.severity == Severity::Error),
            findings,
        }
    }

    pub fn count(&self, code: FindingCode) -> usize {
        self.findings.iter().filter(|f| f.code == code).count()
    }

    pub fn has_suspect(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Suspect)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("call {call:?} checked against spec {spec:?}")]
pub struct SpecMismatch {
    pub call: String,
    pub spec: String,
}

fn same_name(call: &ToolCall, spec: &ToolSpec) -> Result<(), SpecMismatch> {
    if call.name == spec.name {
        Ok(())
    } else {
        Err(SpecMismatch {
            call: call.name.clone(),
            spec: spec.name.clone(),
        })
    }
}

/// `UNDEFINED_FUNCTION` when no tool has exactly the call's name.
pub fn check_undefined_function(call: &ToolCall, tools: &[ToolSpec]) -> Vec<Finding> {
    if tools.iter().any(|t| t.name == call.name) {
        return Vec::new();
    }
    vec![Finding::new(
        FindingCode::UndefinedFunction,
        "name",
        format!("{} is not one of the available tools", call.name),
    )]
}

/// `UNDEFINED_ARGUMENT` per undeclared argument, `MISSING_REQUIRED_ARG`
/// per absent required parameter.
pub fn check_undefined_arguments(call: &ToolCall, spec: &ToolSpec) -> Result<Vec<Finding>, SpecMismatch> {
    same_name(call, spec)?;
    let mut out = Vec::new();
    for name in call.arguments.keys() {
        if spec.param(name).is_none() {
            out.push(Finding::new(
                FindingCode::UndefinedArgument,
                format!("arguments.{name}"),
                format!("{} has no parameter {name}", spec.name),
            ));
        }
    }
    for p in spec.parameters.iter().filter(|p| p.required) {
        if !call.arguments.contains_key(&p.name) {
            out.push(Finding::new(
                FindingCode::MissingRequiredArg,
                format!("arguments.{}", p.name),
                format!("required parameter {} of {} is missing", p.name, spec.name),
            ));
        }
    }
    Ok(out)
}

/// `ARG_TYPE_MISMATCH` per declared argument of the wrong kind. With
/// `repair`, and when every mismatch of the call is coercible, each finding
/// carries the fully repaired call, which is also returned.
pub fn check_argument_types(
    call: &ToolCall,
    spec: &ToolSpec,
    repair: bool,
) -> Result<(Vec<Finding>, Option<ToolCall>), SpecMismatch> {
    same_name(call, spec)?;
    let mut findings = Vec::new();
    let mut repaired = call.clone();
    let mut all_coercible = true;
    for (name, value) in repaired.arguments.iter_mut() {
        let Some(p) = spec.param(name) else { continue };
        if p.value_type.accepts(value.kind()) {
            continue;
        }
        findings.push(Finding::new(
            FindingCode::ArgTypeMismatch,
            format!("arguments.{name}"),
            format!("expected {}, got {}", p.value_type, value.kind()),
        ));
        match coerce(value, p.value_type) {
            Some(fixed) => *value = fixed,
            None => all_coercible = false,
        }
    }
    if !repair || findings.is_empty() || !all_coercible {
        return Ok((findings, None));
    }
    for f in &mut findings {
        f.repair = Some(repaired.clone());
    }
    Ok((findings, Some(repaired)))
}

/// `NAME_HALLUCINATION` for call names absent from the tool list, and for
/// argument names absent from the called tool's parameters (or from every
/// tool's parameters when the call's name is itself unknown). Paths are
/// `tool_calls[i].name` / `tool_calls[i].arguments.x`.
pub fn check_name_hallucination(calls: &[ToolCall], tools: &[ToolSpec]) -> Vec<Finding> {
    let mut out = Vec::new();
    for (i, call) in calls.iter().enumerate() {
        let at = format!("tool_calls[{i}]");
        let spec = tools.iter().find(|t| t.name == call.name);
        if spec.is_none() {
            out.push(
                Finding::new(
                    FindingCode::NameHallucination,
                    "name",
                    format!("tool name {} does not appear in the tool list", call.name),
                )
                .under(&at),
            );
        }
        for arg in call.arguments.keys() {
            let known = match spec {
                Some(s) => s.param(arg).is_some(),
                None => tools.iter().any(|t| t.param(arg).is_some()),
            };
            if !known {
                out.push(
                    Finding::new(
                        FindingCode::NameHallucination,
                        format!("arguments.{arg}"),
                        format!("argument name {arg} does not appear in the parameter list"),
                    )
                    .under(&at),
                );
            }
        }
    }
    out
}

/// Which severities make a trajectory fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailOn {
    #[default]
    Error,
    Suspect,
    Never,
}

impl FailOn {
    pub fn fails(self, report: &DiagnosticReport) -> bool {
        match self {
            FailOn::Error => !report.clean,
            FailOn::Suspect => !report.findings.is_empty(),
            FailOn::Never => false,
        }
    }
}

impl std::str::FromStr for FailOn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "error" => Ok(FailOn::Error),
            "suspect" => Ok(FailOn::Suspect),
            "never" => Ok(FailOn::Never),
            _ => Err(format!("unknown fail-on level {s:?} (expected error, suspect or never)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyPolicy {
    pub apply_repairs: bool,
    pub grounding: bool,
    pub repetition: bool,
    pub max_ngram_repeat: usize,
    pub max_dup_steps: usize,
    pub fail_on: FailOn,
    /// Requests in flight when escalating to a judge.
    pub judge_parallelism: usize,
}

impl Default for VerifyPolicy {
    fn default() -> Self {
        Self {
            apply_repairs: false,
            grounding: true,
            repetition: true,
            max_ngram_repeat: DEFAULT_MAX_NGRAM_REPEAT,
            max_dup_steps: DEFAULT_MAX_DUP_STEPS,
            fail_on: FailOn::Error,
            judge_parallelism: 4,
        }
    }
}

/// Result of a verification run with the repaired trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Verified {
    pub report: DiagnosticReport,
    /// The input with all type repairs applied; equal to the input when
    /// repairs are off or nothing was repairable.
    pub repaired: Trajectory,
}

/// Verifier with optional sandbox and judge.
#[derive(Debug, Default)]
pub struct Verifier<'a> {
    pub policy: VerifyPolicy,
    pub sandbox: Option<&'a SandboxRegistry>,
    pub judge: Option<&'a JudgeClient>,
}

impl<'a> Verifier<'a> {
    pub fn new(policy: VerifyPolicy) -> Self {
        Self {
            policy,
            sandbox: None,
            judge: None,
        }
    }

    pub fn verify(&self, t: &Trajectory) -> Result<Verified, JudgeError> {
        let mut work = t.clone();
        let mut findings = Vec::new();
        let mut escalations: Vec<(usize, JudgeRequest)> = Vec::new();

        for si in 0..work.steps.len() {
            let step_id = work.steps[si].step_id;
            let ctx = self.policy.grounding.then(|| GroundingContext::for_step(t, si));
            let located = |f: Finding| f.under(&format!("steps[{si}]")).at_step(step_id);

            findings.extend(
                check_name_hallucination(&work.steps[si].tool_calls, &work.tools)
                    .into_iter()
                    .map(located),
            );
            for ci in 0..work.steps[si].tool_calls.len() {
                let at = format!("steps[{si}].tool_calls[{ci}]");
                let call_loc = |f: Finding| f.under(&at).at_step(step_id);
                let call = &work.steps[si].tool_calls[ci];

                let undefined = check_undefined_function(call, &work.tools);
                let spec = work.tools.iter().find(|s| s.name == call.name);
                findings.extend(undefined.into_iter().map(call_loc));
                let Some(spec) = spec else { continue };

                let args = check_undefined_arguments(call, spec).expect("names match");
                findings.extend(args.into_iter().map(call_loc));

                let (types, repaired) =
                    check_argument_types(call, spec, self.policy.apply_repairs).expect("names match");
                findings.extend(types.into_iter().map(call_loc));
                if let Some(r) = repaired {
                    work.steps[si].tool_calls[ci] = r;
                }
                let call = &work.steps[si].tool_calls[ci];

                if let Some(ctx) = &ctx {
                    for f in check_value_grounding(call, ctx) {
                        if let Some(judge_ctx) = self.judge.map(|_| ctx) {
                            let value = lookup(call, &f.path);
                            let payload = templates::grounding(&call.name, &f.path, &value, judge_ctx);
                            escalations.push((findings.len(), JudgeRequest::new(JudgeKind::Grounding, payload)));
                        }
                        findings.push(call_loc(f));
                    }
                }

                if let Some(reg) = self.sandbox {
                    if let Err(f) = execute_in_sandbox(call, reg) {
                        findings.push(call_loc(f));
                    }
                }
            }
        }

        if self.policy.repetition {
            findings.extend(check_repetition(
                &work,
                self.policy.max_ngram_repeat,
                self.policy.max_dup_steps,
            ));
        }

        if let (Some(judge), false) = (self.judge, escalations.is_empty()) {
            let reqs: Vec<JudgeRequest> = escalations.iter().map(|(_, r)| r.clone()).collect();
            let verdicts = judge.batch_judge(&reqs, self.policy.judge_parallelism)?;
            let mut drop = vec![false; findings.len()];
            for ((idx, _), verdict) in escalations.iter().zip(verdicts) {
                let verdict = verdict?;
                match verdict.decision {
                    Decision::Accept => drop[*idx] = true,
                    d => {
                        let d = if d == Decision::Reject { "reject" } else { "uncertain" };
                        findings[*idx].detail.push_str(&format!(" (judge: {d})"));
                    }
                }
            }
            let mut keep = drop.into_iter().map(|d| !d);
            findings.retain(|_| keep.next().unwrap_or(true));
        }

        Ok(Verified {
            report: DiagnosticReport::new(t.unique_trajectory_id.clone(), findings),
            repaired: work,
        })
    }
}

/// Value at a call-relative `arguments.x[0].y` path.
fn lookup(call: &ToolCall, path: &str) -> Value {
    let mut found = Value::String(String::new());
    for (name, v) in call.arguments.iter() {
        v.for_each_leaf(&mut |sub, leaf| {
            if format!("arguments.{name}{sub}") == path {
                found = leaf.clone();
            }
        });
    }
    found
}

/// Verifies a corpus on `workers` threads. Results follow input order; the
/// first judge error (in input order) is returned.
pub fn verify_corpus(corpus: &[Trajectory], verifier: &Verifier, workers: usize) -> Result<Vec<Verified>, JudgeError> {
    let chunk = corpus.len().div_ceil(workers.max(1)).max(1);
    let parts: Vec<Vec<Result<Verified, JudgeError>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = corpus
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|t| verifier.verify(t)).collect()))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("verify worker panicked"))
            .collect()
    });
    parts.into_iter().flatten().collect()
}

/// Rule-based verification without sandbox or judge.
pub fn verify_trajectory(t: &Trajectory, policy: &VerifyPolicy) -> DiagnosticReport {
    Verifier::new(policy.clone())
        .verify(t)
        .expect("no judge, no judge errors")
        .report
}
