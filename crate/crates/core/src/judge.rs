//! External judge interface.
//!
//! Rule-based checks cannot decide everything: whether an argument value is
//! really licensed by the conversation, or whether a trajectory reads well.
//! Those questions are sent to a judge model through a [`Transport`]. The
//! client speaks one JSON request/response contract over any transport:
//!
//! ```text
//! request : {"request_id": "...", "kind": "grounding", "payload": "...", "digest": "..."}
//! verdict : {"decision": "accept" | "reject" | "uncertain", "score": 1..5, "rationale": "..."}
//! rephrase: {"candidates": ["...", "..."]}
//! ```
//!
//! `digest` is the 16-hex-digit FNV-1a 64 of the payload. The
//! [`RecordingTransport`] answers from a recordings file keyed by that digest
//! and fails loudly on anything it has not recorded; it never invents a
//! verdict.
//!
//! Real endpoints are configured with `TOOLCORPUS_JUDGE_ENDPOINT` and, when
//! the endpoint needs one, `TOOLCORPUS_JUDGE_API_KEY`. Neither is read in
//! mock mode.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::rng::digest_hex;

pub const ENDPOINT_ENV: &str = "TOOLCORPUS_JUDGE_ENDPOINT";
pub const API_KEY_ENV: &str = "TOOLCORPUS_JUDGE_API_KEY";

pub const DEFAULT_ACCEPT_THRESHOLD: u8 = 3;
pub const DEFAULT_MAX_RETRIES: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeKind {
    Grounding,
    TrajectoryRating,
    StepRating,
    RephraseAccept,
    /// Asks for rephrasings of a task instruction; answered with
    /// `candidates` rather than a verdict.
    RephraseGenerate,
}

impl JudgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            JudgeKind::Grounding => "grounding",
            JudgeKind::TrajectoryRating => "trajectory_rating",
            JudgeKind::StepRating => "step_rating",
            JudgeKind::RephraseAccept => "rephrase_accept",
            JudgeKind::RephraseGenerate => "rephrase_generate",
        }
    }

    pub fn is_rating(self) -> bool {
        matches!(self, JudgeKind::TrajectoryRating | JudgeKind::StepRating)
    }
}

impl fmt::Display for JudgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeRequest {
    pub request_id: String,
    pub kind: JudgeKind,
    pub payload: String,
}

impl JudgeRequest {
    /// Builds a request whose id is derived from kind and payload digest.
    pub fn new(kind: JudgeKind, payload: String) -> Self {
        Self {
            request_id: format!("{}-{}", kind, digest_hex(payload.as_bytes())),
            kind,
            payload,
        }
    }

    pub fn digest(&self) -> String {
        digest_hex(self.payload.as_bytes())
    }

    fn wire_body(&self) -> String {
        serde_json::json!({
            "request_id": self.request_id,
            "kind": self.kind,
            "payload": self.payload,
            "digest": self.digest(),
        })
        .to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject,
    Uncertain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub request_id: String,
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<u8>,
    #[serde(default)]
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    /// Worth retrying (timeouts, 5xx, a crashed helper process).
    #[error("transient transport failure: {0}")]
    Transient(String),
    #[error("transport failure: {0}")]
    Fatal(String),
    #[error("no recorded response for payload digest {digest}")]
    MissingRecording { digest: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JudgeError {
    #[error("judge is not configured: {0}")]
    Configuration(String),
    #[error("MISSING_RECORDING: no recorded response for payload digest {digest}")]
    MissingRecording { digest: String },
    #[error("judge transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed judge response: {0}")]
    Malformed(String),
    #[error("all {} judge requests failed", .0.len())]
    AllFailed(Vec<JudgeError>),
}

/// Moves one request body to a judge and returns its response body.
pub trait Transport: Send + Sync {
    fn exchange(&self, request_body: &str) -> Result<String, TransportError>;
}

/// One line of a recordings file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Recording {
    pub digest: String,
    pub response: serde_json::Value,
}

/// Answers from recorded responses keyed by payload digest.
#[derive(Debug, Clone, Default)]
pub struct RecordingTransport {
    responses: HashMap<String, String>,
}

impl RecordingTransport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `response` for requests carrying `payload`.
    pub fn record(mut self, payload: &str, response: serde_json::Value) -> Self {
        self.responses
            .insert(digest_hex(payload.as_bytes()), response.to_string());
        self
    }

    /// Loads a JSON-lines file of [`Recording`]s. Blank lines are skipped.
    pub fn load(path: &Path) -> Result<Self, JudgeError> {
        let file = std::fs::File::open(path).map_err(|e| {
            JudgeError::Configuration(format!("cannot open recordings {}: {e}", path.display()))
        })?;
        let mut responses = HashMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| JudgeError::Configuration(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Recording = serde_json::from_str(&line).map_err(|e| {
                JudgeError::Configuration(format!("recordings line {}: {e}", i + 1))
            })?;
            responses.insert(rec.digest, rec.response.to_string());
        }
        Ok(Self { responses })
    }
}

#[derive(Deserialize)]
struct WireRequest {
    payload: String,
}

impl Transport for RecordingTransport {
    fn exchange(&self, request_body: &str) -> Result<String, TransportError> {
        let req: WireRequest = serde_json::from_str(request_body)
            .map_err(|e| TransportError::Fatal(format!("bad request body: {e}")))?;
        let digest = digest_hex(req.payload.as_bytes());
        self.responses
            .get(&digest)
            .cloned()
            .ok_or(TransportError::MissingRecording { digest })
    }
}

/// Runs a helper program per request: the request body goes to its stdin,
/// the response is read from its stdout.
#[derive(Debug, Clone)]
pub struct CommandTransport {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl Transport for CommandTransport {
    fn exchange(&self, request_body: &str) -> Result<String, TransportError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| TransportError::Fatal(format!("cannot start judge command: {e}")))?;
        child
            .stdin
            .take()
            .expect("stdin is piped")
            .write_all(request_body.as_bytes())
            .map_err(|e| TransportError::Transient(e.to_string()))?;
        let output = child
            .wait_with_output()
            .map_err(|e| TransportError::Transient(e.to_string()))?;
        if !output.status.success() {
            return Err(TransportError::Transient(format!(
                "judge command exited with {}",
                output.status
            )));
        }
        String::from_utf8(output.stdout).map_err(|e| TransportError::Fatal(e.to_string()))
    }
}

/// POSTs the request body to an HTTP endpoint.
pub struct HttpTransport {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Result<Self, JudgeError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(60))
            .build()
            .map_err(|e| JudgeError::Configuration(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            api_key,
            client,
        })
    }

    /// Reads the endpoint and optional key from the environment.
    pub fn from_env() -> Result<Self, JudgeError> {
        let endpoint = std::env::var(ENDPOINT_ENV)
            .ok()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| JudgeError::Configuration(format!("{ENDPOINT_ENV} is not set")))?;
        Self::new(endpoint, std::env::var(API_KEY_ENV).ok().filter(|s| !s.is_empty()))
    }
}

impl Transport for HttpTransport {
    fn exchange(&self, request_body: &str) -> Result<String, TransportError> {
        let mut req = self
            .client
            .post(&self.endpoint)
            .header("content-type", "application/json")
            .body(request_body.to_string());
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() || e.is_connect() {
                TransportError::Transient(e.to_string())
            } else {
                TransportError::Fatal(e.to_string())
            }
        })?;
        let status = resp.status();
        let body = resp
            .text()
            .map_err(|e| TransportError::Transient(e.to_string()))?;
        if status.is_success() {
            Ok(body)
        } else if status.is_server_error() || status.as_u16() == 429 {
            Err(TransportError::Transient(format!("HTTP {status}")))
        } else {
            Err(TransportError::Fatal(format!("HTTP {status}: {body}")))
        }
    }
}

/// Serializable transport selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TransportConfig {
    Mock { recordings: PathBuf },
    Command { program: PathBuf, #[serde(default)] args: Vec<String> },
    /// Endpoint and key come from the environment.
    Http,
}

impl TransportConfig {
    pub fn build(&self) -> Result<Box<dyn Transport>, JudgeError> {
        Ok(match self {
            TransportConfig::Mock { recordings } => Box::new(RecordingTransport::load(recordings)?),
            TransportConfig::Command { program, args } => Box::new(CommandTransport {
                program: program.clone(),
                args: args.clone(),
            }),
            TransportConfig::Http => Box::new(HttpTransport::from_env()?),
        })
    }
}

#[derive(Deserialize)]
struct WireVerdict {
    #[serde(default)]
    request_id: Option<String>,
    #[serde(default)]
    decision: Option<Decision>,
    #[serde(default)]
    score: Option<serde_json::Value>,
    #[serde(default)]
    rationale: String,
}

#[derive(Deserialize)]
struct WireCandidates {
    candidates: Vec<String>,
}

pub struct JudgeClient {
    transport: Box<dyn Transport>,
    pub max_retries: u32,
    pub accept_threshold: u8,
}

impl fmt::Debug for JudgeClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JudgeClient")
            .field("max_retries", &self.max_retries)
            .field("accept_threshold", &self.accept_threshold)
            .finish_non_exhaustive()
    }
}

impl JudgeClient {
    pub fn new(transport: Box<dyn Transport>) -> Self {
        Self {
            transport,
            max_retries: DEFAULT_MAX_RETRIES,
            accept_threshold: DEFAULT_ACCEPT_THRESHOLD,
        }
    }

    pub fn from_config(config: &TransportConfig) -> Result<Self, JudgeError> {
        Ok(Self::new(config.build()?))
    }

    fn exchange(&self, req: &JudgeRequest) -> Result<String, JudgeError> {
        let body = req.wire_body();
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.transport.exchange(&body) {
                Ok(resp) => return Ok(resp),
                Err(TransportError::MissingRecording { digest }) => {
                    return Err(JudgeError::MissingRecording { digest })
                }
                Err(TransportError::Transient(msg)) if attempts > self.max_retries => {
                    return Err(JudgeError::Transport {
                        attempts,
                        message: msg,
                    })
                }
                Err(TransportError::Transient(_)) => continue,
                Err(TransportError::Fatal(msg)) => {
                    return Err(JudgeError::Transport {
                        attempts,
                        message: msg,
                    })
                }
            }
        }
    }

    /// Sends one verdict request. Ratings are turned into accept/reject by
    /// comparing the score with `accept_threshold`.
    pub fn judge(&self, req: &JudgeRequest) -> Result<JudgeVerdict, JudgeError> {
        if req.kind == JudgeKind::RephraseGenerate {
            return Err(JudgeError::Configuration(
                "rephrase_generate requests return candidates, not verdicts".into(),
            ));
        }
        let body = self.exchange(req)?;
        let wire: WireVerdict =
            serde_json::from_str(&body).map_err(|e| JudgeError::Malformed(e.to_string()))?;
        if let Some(id) = &wire.request_id {
            if id != &req.request_id {
                return Err(JudgeError::Malformed(format!(
                    "response for {id:?} does not match request {:?}",
                    req.request_id
                )));
            }
        }
        let score = match (wire.score.filter(|v| !v.is_null()), req.kind.is_rating()) {
            (None, false) => None,
            (Some(v), true) => {
                let s = v
                    .as_u64()
                    .filter(|s| (1..=5).contains(s))
                    .ok_or_else(|| JudgeError::Malformed(format!("score {v} is not in 1..=5")))?;
                Some(s as u8)
            }
            (None, true) => return Err(JudgeError::Malformed("rating response without score".into())),
            (Some(_), false) => {
                return Err(JudgeError::Malformed(format!(
                    "{} response must not carry a score",
                    req.kind
                )))
            }
        };
        let decision = match score {
            Some(s) if s >= self.accept_threshold => Decision::Accept,
            Some(_) => Decision::Reject,
            None => wire
                .decision
                .ok_or_else(|| JudgeError::Malformed("response without decision".into()))?,
        };
        Ok(JudgeVerdict {
            request_id: req.request_id.clone(),
            decision,
            score,
            rationale: wire.rationale,
        })
    }

    /// Sends a generation request and returns the candidate texts.
    pub fn candidates(&self, req: &JudgeRequest) -> Result<Vec<String>, JudgeError> {
        let body = self.exchange(req)?;
        let wire: WireCandidates =
            serde_json::from_str(&body).map_err(|e| JudgeError::Malformed(e.to_string()))?;
        Ok(wire.candidates)
    }

    /// Judges every request with up to `parallelism` requests in flight.
    /// Results come back in request order. Fails as a whole only when every
    /// request failed.
    pub fn batch_judge(
        &self,
        reqs: &[JudgeRequest],
        parallelism: usize,
    ) -> Result<Vec<Result<JudgeVerdict, JudgeError>>, JudgeError> {
        let workers = parallelism.max(1).min(reqs.len().max(1));
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<JudgeVerdict, JudgeError>>>> =
            reqs.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(req) = reqs.get(i) else { break };
                    let result = self.judge(req);
                    *slots[i].lock().expect("slot lock") = Some(result);
                });
            }
        });
        let results: Vec<_> = slots
            .into_iter()
            .map(|m| m.into_inner().expect("slot lock").expect("every slot filled"))
            .collect();
        if !results.is_empty() && results.iter().all(Result::is_err) {
            return Err(JudgeError::AllFailed(
                results.into_iter().filter_map(Result::err).collect(),
            ));
        }
        Ok(results)
    }
}

/// Payload templates, one per request kind. The wording is ours; a judge
/// deployment only needs to honour the response contract.
pub mod templates {
    use crate::literal;
    use crate::model::{Step, Trajectory};
    use crate::value::Value;
    use crate::verify::GroundingContext;

    fn context_block(ctx: &GroundingContext) -> String {
        let mut out = format!("Query: {}\n", ctx.query);
        if !ctx.task_instruction.is_empty() {
            out.push_str(&format!("Task instruction: {}\n", ctx.task_instruction));
        }
        for obs in &ctx.prior_observations {
            out.push_str(&format!("Observation: {obs}\n"));
        }
        for input in &ctx.prior_user_inputs {
            out.push_str(&format!("User input: {input}\n"));
        }
        let mut enums: Vec<_> = ctx.enum_values.iter().collect();
        enums.sort();
        for e in enums {
            out.push_str(&format!("Allowed value: {e}\n"));
        }
        out
    }

    pub fn grounding(tool: &str, argument: &str, value: &Value, ctx: &GroundingContext) -> String {
        format!(
            "[JUDGE GROUNDING]\nDecide whether the argument value is supported by the context. \
             Answer accept if it is, reject if it is not, uncertain if you cannot tell.\n\n{}\
             Tool: {tool}\nArgument: {argument} = {}\n",
            context_block(ctx),
            literal::compact(value),
        )
    }

    fn step_block(step: &Step) -> String {
        literal::pretty(&step.to_value())
    }

    pub fn trajectory_rating(t: &Trajectory) -> String {
        let steps = Value::Array(t.steps.iter().map(Step::to_value).collect());
        format!(
            "[JUDGE TRAJECTORY RATING]\nRate how well the trajectory accomplishes the query, \
             from 1 (useless) to 5 (excellent).\n\nQuery: {}\nSteps:\n{}\n",
            t.query,
            literal::pretty(&steps),
        )
    }

    pub fn step_rating(t: &Trajectory, step_index: usize) -> String {
        format!(
            "[JUDGE STEP RATING]\nRate the thought and action of this step given the query, \
             from 1 (useless) to 5 (excellent).\n\nQuery: {}\nStep:\n{}\n",
            t.query,
            step_block(&t.steps[step_index]),
        )
    }

    pub fn rephrase_generate(instruction: &str) -> String {
        format!(
            "[JUDGE REPHRASE GENERATE]\nRewrite the task instruction in different words \
             without changing what it asks for. Return several candidates.\n\nInstruction: {instruction}\n"
        )
    }

    pub fn rephrase_accept(original: &str, candidate: &str) -> String {
        format!(
            "[JUDGE REPHRASE ACCEPT]\nFollow the rephrased instruction and check that it leads \
             to the same function calls as the original. Answer accept or reject.\n\n\
             Original: {original}\nRephrased: {candidate}\n"
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;
    use std::sync::atomic::AtomicU32;

    fn req(kind: JudgeKind, payload: &str) -> JudgeRequest {
        JudgeRequest::new(kind, payload.to_string())
    }

    #[test]
    fn recorded_reject_passes_through() {
        let t = RecordingTransport::new().record("nevada", json!({"decision": "reject", "rationale": "absent"}));
        let client = JudgeClient::new(Box::new(t));
        let r = req(JudgeKind::Grounding, "nevada");
        let v = client.judge(&r).unwrap();
        assert_eq!(v.decision, Decision::Reject);
        assert_eq!(v.request_id, r.request_id);
        assert_eq!(v.score, None);
    }

    #[test]
    fn unrecorded_request_is_an_error() {
        let client = JudgeClient::new(Box::new(RecordingTransport::new()));
        let err = client.judge(&req(JudgeKind::Grounding, "x")).unwrap_err();
        assert!(matches!(err, JudgeError::MissingRecording { .. }));
        assert!(err.to_string().starts_with("MISSING_RECORDING"));
    }

    #[test]
    fn rating_threshold_decides() {
        let t = RecordingTransport::new()
            .record("good", json!({"score": 4}))
            .record("poor", json!({"score": 2, "decision": "accept"}))
            .record("edge", json!({"score": 3}));
        let client = JudgeClient::new(Box::new(t));
        let good = client.judge(&req(JudgeKind::TrajectoryRating, "good")).unwrap();
        assert_eq!((good.score, good.decision), (Some(4), Decision::Accept));
        let poor = client.judge(&req(JudgeKind::StepRating, "poor")).unwrap();
        assert_eq!((poor.score, poor.decision), (Some(2), Decision::Reject));
        let edge = client.judge(&req(JudgeKind::TrajectoryRating, "edge")).unwrap();
        assert_eq!(edge.decision, Decision::Accept);
    }

    #[test]
    fn malformed_responses_are_rejected() {
        let t = RecordingTransport::new()
            .record("noscore", json!({"decision": "accept"}))
            .record("range", json!({"score": 9}))
            .record("extra", json!({"decision": "accept", "score": 4}))
            .record("nodecision", json!({"rationale": "?"}))
            .record("wrongid", json!({"request_id": "other", "decision": "accept"}));
        let client = JudgeClient::new(Box::new(t));
        for (kind, p) in [
            (JudgeKind::TrajectoryRating, "noscore"),
            (JudgeKind::TrajectoryRating, "range"),
            (JudgeKind::Grounding, "extra"),
            (JudgeKind::Grounding, "nodecision"),
            (JudgeKind::Grounding, "wrongid"),
        ] {
            assert!(matches!(client.judge(&req(kind, p)), Err(JudgeError::Malformed(_))), "{p}");
        }
    }

    struct Flaky {
        failures: AtomicU32,
    }

    impl Transport for Flaky {
        fn exchange(&self, _: &str) -> Result<String, TransportError> {
            if self.failures.fetch_sub(1, Ordering::SeqCst) > 0 {
                Err(TransportError::Transient("timeout".into()))
            } else {
                Ok(json!({"decision": "accept"}).to_string())
            }
        }
    }

    #[test]
    fn transient_failures_are_retried_up_to_the_cap() {
        let ok = JudgeClient::new(Box::new(Flaky { failures: AtomicU32::new(2) }));
        assert!(ok.judge(&req(JudgeKind::Grounding, "p")).is_ok());
        let fail = JudgeClient::new(Box::new(Flaky { failures: AtomicU32::new(3) }));
        assert!(matches!(
            fail.judge(&req(JudgeKind::Grounding, "p")),
            Err(JudgeError::Transport { attempts: 3, .. })
        ));
    }

    #[test]
    fn batch_keeps_order_and_partial_failures() {
        let t = RecordingTransport::new()
            .record("a", json!({"decision": "accept"}))
            .record("c", json!({"decision": "reject"}));
        let client = JudgeClient::new(Box::new(t));
        let reqs: Vec<_> = ["a", "b", "c"].iter().map(|p| req(JudgeKind::Grounding, p)).collect();
        let results = client.batch_judge(&reqs, 8).unwrap();
        assert_eq!(results[0].as_ref().unwrap().decision, Decision::Accept);
        assert!(matches!(results[1], Err(JudgeError::MissingRecording { .. })));
        assert_eq!(results[2].as_ref().unwrap().decision, Decision::Reject);
        let all_bad: Vec<_> = ["x", "y"].iter().map(|p| req(JudgeKind::Grounding, p)).collect();
        assert!(matches!(client.batch_judge(&all_bad, 2), Err(JudgeError::AllFailed(e)) if e.len() == 2));
    }

    #[test]
    fn batch_order_independent_of_parallelism() {
        let mut t = RecordingTransport::new();
        let mut reqs = Vec::new();
        for i in 0..40 {
            let p = format!("payload {i}");
            let decision = if i % 3 == 0 { "reject" } else { "accept" };
            t = t.record(&p, json!({"decision": decision, "rationale": p}));
            reqs.push(req(JudgeKind::Grounding, &p));
        }
        let client = JudgeClient::new(Box::new(t));
        let one = client.batch_judge(&reqs, 1).unwrap();
        let eight = client.batch_judge(&reqs, 8).unwrap();
        assert_eq!(one, eight);
        for (r, v) in reqs.iter().zip(&one) {
            assert_eq!(&v.as_ref().unwrap().request_id, &r.request_id);
        }
    }

    #[test]
    fn http_mode_needs_an_endpoint() {
        // The variable is never set in the test environment.
        if std::env::var(ENDPOINT_ENV).is_err() {
            assert!(matches!(
                TransportConfig::Http.build(),
                Err(JudgeError::Configuration(_))
            ));
        }
    }

    #[test]
    fn recordings_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.jsonl");
        let rec = Recording {
            digest: digest_hex(b"hello"),
            response: json!({"decision": "uncertain"}),
        };
        std::fs::write(&path, format!("{}\n\n", serde_json::to_string(&rec).unwrap())).unwrap();
        let client = JudgeClient::from_config(&TransportConfig::Mock { recordings: path }).unwrap();
        assert_eq!(
            client.judge(&req(JudgeKind::Grounding, "hello")).unwrap().decision,
            Decision::Uncertain
        );
    }
}
