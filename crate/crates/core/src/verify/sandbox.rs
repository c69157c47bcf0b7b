//! Local execution sandbox.
//!
//! Calls are executed against stubs instead of real services. A stub maps
//! an argument map to an outcome text or a failure, and must be pure.
//! Stubs are usually declared in a registry file:
//!
//! ```json
//! {"functions": [
//!   {"name": "get_weather",
//!    "required": ["location", "date"],
//!    "constraints": {"days": {"min": 1, "max": 14}, "unit": {"one_of": ["c", "f"]}},
//!    "response": "Weather for {location} on {date}: sunny, 21 C"}
//! ]}
//! ```
//!
//! `{name}` placeholders in `response` are replaced by argument values
//! (strings verbatim, other values as compact JSON). A stub with `fail`
//! set always fails with that message.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Finding, FindingCode};
use crate::literal;
use crate::model::ToolCall;
use crate::value::{OrderedMap, Value};

/// An executable stand-in for a tool.
pub trait Stub: Send + Sync {
    fn call(&self, arguments: &OrderedMap<Value>) -> Result<String, String>;
}

impl<F> Stub for F
where
    F: Fn(&OrderedMap<Value>) -> Result<String, String> + Send + Sync,
{
    fn call(&self, arguments: &OrderedMap<Value>) -> Result<String, String> {
        self(arguments)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub one_of: Option<Vec<Value>>,
}

/// A stub described by data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclaredStub {
    pub name: String,
    #[serde(default)]
    pub required: Vec<String>,
    #[serde(default)]
    pub constraints: BTreeMap<String, Constraint>,
    #[serde(default)]
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail: Option<String>,
}

impl Stub for DeclaredStub {
    fn call(&self, args: &OrderedMap<Value>) -> Result<String, String> {
        if let Some(msg) = &self.fail {
            return Err(msg.clone());
        }
        for r in &self.required {
            if !args.contains_key(r) {
                return Err(format!("missing argument {r}"));
            }
        }
        for (name, c) in &self.constraints {
            let Some(v) = args.get(name) else { continue };
            if c.min.is_some() || c.max.is_some() {
                let n = v
                    .as_f64()
                    .ok_or_else(|| format!("argument {name} must be numeric"))?;
                if c.min.is_some_and(|m| n < m) || c.max.is_some_and(|m| n > m) {
                    return Err(format!("argument {name} = {} is out of range", literal::compact(v)));
                }
            }
            if let Some(allowed) = &c.one_of {
                if !allowed.contains(v) {
                    return Err(format!("argument {name} = {} is not allowed", literal::compact(v)));
                }
            }
        }
        fill_template(&self.response, args)
    }
}

fn fill_template(template: &str, args: &OrderedMap<Value>) -> Result<String, String> {
    let mut out = String::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let Some(len) = rest[open..].find('}') else { break };
        let key = &rest[open + 1..open + len];
        out.push_str(&rest[..open]);
        match args.get(key) {
            Some(Value::String(s)) => out.push_str(s),
            Some(v) => out.push_str(&literal::compact(v)),
            None => return Err(format!("missing argument {key}")),
        }
        rest = &rest[open + len + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("stub {0:?} is registered twice")]
    Duplicate(String),
    #[error("cannot read sandbox registry: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad sandbox registry: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryFile {
    functions: Vec<DeclaredStub>,
}

#[derive(Default)]
pub struct SandboxRegistry {
    functions: BTreeMap<String, Box<dyn Stub>>,
}

impl std::fmt::Debug for SandboxRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.functions.keys()).finish()
    }
}

impl SandboxRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, stub: impl Stub + 'static) -> Result<(), RegistryError> {
        let name = name.into();
        if self.functions.contains_key(&name) {
            return Err(RegistryError::Duplicate(name));
        }
        self.functions.insert(name, Box::new(stub));
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, RegistryError> {
        let file: RegistryFile = serde_json::from_str(text)?;
        let mut reg = Self::new();
        for stub in file.functions {
            reg.register(stub.name.clone(), stub)?;
        }
        Ok(reg)
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.functions.contains_key(name)
    }
}

/// Runs the call's stub. Failures come back as an `EXEC_FAILURE` finding
/// with a path relative to the call.
pub fn execute_in_sandbox(call: &ToolCall, registry: &SandboxRegistry) -> Result<String, Finding> {
    let Some(stub) = registry.functions.get(&call.name) else {
        return Err(Finding::new(
            FindingCode::ExecFailure,
            "name",
            format!("no sandbox stub for {}", call.name),
        ));
    };
    stub.call(&call.arguments).map_err(|msg| {
        Finding::new(
            FindingCode::ExecFailure,
            "",
            format!("{} failed in sandbox: {msg}", call.name),
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const REGISTRY: &str = r#"{"functions": [
        {"name": "get_weather", "required": ["location", "date"],
         "response": "Weather for {location} on {date}: sunny, 21 C"},
        {"name": "get_fire_info", "required": ["location"],
         "constraints": {"radius": {"min": 0}},
         "response": "2 active fires within {radius} miles of {location}"},
        {"name": "broken", "fail": "service unavailable"}
    ]}"#;

    #[test]
    fn canned_outcome() {
        let reg = SandboxRegistry::from_json(REGISTRY).unwrap();
        let call = ToolCall::new("get_weather").arg("location", "Palo Alto").arg("date", "today");
        assert_eq!(
            execute_in_sandbox(&call, &reg).unwrap(),
            "Weather for Palo Alto on today: sunny, 21 C"
        );
        assert_eq!(execute_in_sandbox(&call, &reg), execute_in_sandbox(&call, &reg));
    }

    #[test]
    fn failures() {
        let reg = SandboxRegistry::from_json(REGISTRY).unwrap();
        let unknown = ToolCall::new("get_news");
        assert_eq!(execute_in_sandbox(&unknown, &reg).unwrap_err().code, FindingCode::ExecFailure);
        let negative = ToolCall::new("get_fire_info").arg("location", "California").arg("radius", -1i64);
        assert!(execute_in_sandbox(&negative, &reg).is_err());
        let ok = ToolCall::new("get_fire_info").arg("location", "California").arg("radius", 50i64);
        assert_eq!(execute_in_sandbox(&ok, &reg).unwrap(), "2 active fires within 50 miles of California");
        assert!(execute_in_sandbox(&ToolCall::new("broken"), &reg).is_err());
        let missing = ToolCall::new("get_weather").arg("location", "Palo Alto");
        assert!(execute_in_sandbox(&missing, &reg).is_err());
    }

    #[test]
    fn duplicate_names_rejected() {
        let dup = r#"{"functions": [{"name": "a"}, {"name": "a"}]}"#;
        assert!(matches!(SandboxRegistry::from_json(dup), Err(RegistryError::Duplicate(_))));
    }

    #[test]
    fn closures_are_stubs() {
        let mut reg = SandboxRegistry::new();
        reg.register("echo", |args: &OrderedMap<Value>| Ok(format!("{} args", args.len())))
            .unwrap();
        assert_eq!(execute_in_sandbox(&ToolCall::new("echo").arg("x", 1i64), &reg).unwrap(), "1 args");
    }
}
