//! Repair systems behind a one-request, one-response JSON protocol.
//!
//! Request: `{"case_id", "prompt": {"primer", "violation", "manifest_context",
//! "graph_context", "instructions"}}`. Response: `{"answer", "tokens_in",
//! "tokens_out"}` where `answer` is the system's raw text and the token
//! counts are optional.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::rdf::{Graph, PrefixMap};
use crate::sparql::diff_update;

use super::prompt::Prompt;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdapterRequest {
    pub case_id: String,
    pub prompt: Prompt,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterReply {
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens_in: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens_out: Option<u64>,
}

/// A failed exchange: the system could not be reached or replied with
/// something other than a response object.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("transport: {0}")]
    Transport(String),
    /// The reply was not a response object; the raw line is kept.
    #[error("reply is not a response object")]
    BadReply(String),
}

pub trait Adapter: Sync {
    fn repair(&self, req: &AdapterRequest) -> Result<AdapterReply, TransportError>;
}

/// `cmd:<shell command>`, `http:<url>`, `oracle` or `malformed`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AdapterSpec {
    Command(String),
    Http(String),
    Oracle,
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid adapter \"{0}\" (expected cmd:<command>, http:<url>, oracle or malformed)")]
pub struct AdapterSpecError(pub String);

impl std::str::FromStr for AdapterSpec {
    type Err = AdapterSpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || AdapterSpecError(s.to_owned());
        if let Some(cmd) = s.strip_prefix("cmd:") {
            if cmd.trim().is_empty() {
                return Err(err());
            }
            return Ok(AdapterSpec::Command(cmd.to_owned()));
        }
        if s.starts_with("http://") || s.starts_with("https://") {
            return Ok(AdapterSpec::Http(s.to_owned()));
        }
        if let Some(rest) = s.strip_prefix("http:") {
            let url = if rest.starts_with("http://") || rest.starts_with("https://") {
                rest.to_owned()
            } else {
                format!("http://{}", rest.trim_start_matches('/'))
            };
            if url.len() <= "http://".len() {
                return Err(err());
            }
            return Ok(AdapterSpec::Http(url));
        }
        match s {
            "oracle" => Ok(AdapterSpec::Oracle),
            "malformed" => Ok(AdapterSpec::Malformed),
            _ => Err(err()),
        }
    }
}

fn parse_reply(line: &str) -> Result<AdapterReply, TransportError> {
    serde_json::from_str(line.trim())
        .map_err(|_| TransportError::BadReply(line.trim_end().to_owned()))
}

struct Proc {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl Proc {
    fn spawn(cmd: &str) -> Result<Self, TransportError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| TransportError::Transport(format!("cannot start `{cmd}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Proc {
            child,
            stdin,
            stdout,
        })
    }

    fn exchange(&mut self, line: &str) -> Result<String, TransportError> {
        let io = |e: std::io::Error| TransportError::Transport(e.to_string());
        self.stdin.write_all(line.as_bytes()).map_err(io)?;
        self.stdin.write_all(b"\n").map_err(io)?;
        self.stdin.flush().map_err(io)?;
        let mut reply = String::new();
        if self.stdout.read_line(&mut reply).map_err(io)? == 0 {
            return Err(TransportError::Transport(
                "adapter process closed its output".into(),
            ));
        }
        Ok(reply)
    }
}

impl Drop for Proc {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Long-running processes speaking one JSON object per line. Concurrent
/// requests each get their own process.
pub struct CommandAdapter {
    cmd: String,
    idle: Mutex<Vec<Proc>>,
    retries: usize,
}

impl CommandAdapter {
    pub fn new(cmd: impl Into<String>) -> Self {
        CommandAdapter {
            cmd: cmd.into(),
            idle: Mutex::new(Vec::new()),
            retries: 2,
        }
    }
}

impl Adapter for CommandAdapter {
    fn repair(&self, req: &AdapterRequest) -> Result<AdapterReply, TransportError> {
        let line = serde_json::to_string(req).expect("requests serialize");
        let mut last = TransportError::Transport("no attempt made".into());
        for _ in 0..=self.retries {
            let pooled = self.idle.lock().expect("adapter pool").pop();
            let mut proc = match pooled {
                Some(p) => p,
                None => Proc::spawn(&self.cmd)?,
            };
            match proc.exchange(&line) {
                Ok(reply) => {
                    self.idle.lock().expect("adapter pool").push(proc);
                    return parse_reply(&reply);
                }
                // the process is dropped and a fresh one spawned on retry
                Err(e) => last = e,
            }
        }
        Err(last)
    }
}

/// `POST <url>` (with `/repair` appended unless already present).
pub struct HttpAdapter {
    url: String,
    agent: ureq::Agent,
    retries: usize,
}

impl HttpAdapter {
    pub fn new(url: &str) -> Self {
        let url = if url.trim_end_matches('/').ends_with("/repair") {
            url.to_owned()
        } else {
            format!("{}/repair", url.trim_end_matches('/'))
        };
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(300)))
            .http_status_as_error(false)
            .build();
        HttpAdapter {
            url,
            agent: ureq::Agent::new_with_config(config),
            retries: 2,
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl Adapter for HttpAdapter {
    fn repair(&self, req: &AdapterRequest) -> Result<AdapterReply, TransportError> {
        let mut last = TransportError::Transport("no attempt made".into());
        for _ in 0..=self.retries {
            match self.agent.post(&self.url).send_json(req) {
                Ok(mut resp) => {
                    let status = resp.status();
                    let body = resp
                        .body_mut()
                        .read_to_string()
                        .map_err(|e| TransportError::Transport(e.to_string()))?;
                    if !status.is_success() {
                        return Err(TransportError::Transport(format!("HTTP {status}")));
                    }
                    return parse_reply(&body);
                }
                Err(e) => last = TransportError::Transport(e.to_string()),
            }
        }
        Err(last)
    }
}

/// The answer an ideal repair system gives: the update turning `invalid`
/// back into `original`, wrapped the way the prompt asks for.
pub fn oracle_answer(invalid: &Graph, original: &Graph, prefixes: &PrefixMap) -> String {
    json!({ "answer": diff_update(invalid, original, prefixes) }).to_string()
}

/// Replays ground-truth repairs by case id, reporting no token counts.
#[derive(Default)]
pub struct OracleAdapter {
    answers: HashMap<String, String>,
}

impl OracleAdapter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        case_id: impl Into<String>,
        invalid: &Graph,
        original: &Graph,
        prefixes: &PrefixMap,
    ) {
        self.answers
            .insert(case_id.into(), oracle_answer(invalid, original, prefixes));
    }
}

impl Adapter for OracleAdapter {
    fn repair(&self, req: &AdapterRequest) -> Result<AdapterReply, TransportError> {
        let answer = self.answers.get(&req.case_id).cloned().ok_or_else(|| {
            TransportError::Transport(format!("oracle knows no case {}", req.case_id))
        })?;
        Ok(AdapterReply {
            answer,
            tokens_in: None,
            tokens_out: None,
        })
    }
}

/// Always answers with prose instead of JSON.
pub struct MalformedAdapter;

impl Adapter for MalformedAdapter {
    fn repair(&self, _req: &AdapterRequest) -> Result<AdapterReply, TransportError> {
        Ok(AdapterReply {
            answer: "Sure! To fix this you should add the missing reviewer.".into(),
            tokens_in: Some(0),
            tokens_out: Some(10),
        })
    }
}

/// Pulls the update text out of a system's raw answer: the `"answer"` string
/// of the JSON object it contains.
pub fn extract_answer(raw: &str) -> Result<String, String> {
    let start = raw.find('{').ok_or("no JSON object in the answer")?;
    let end = raw.rfind('}').ok_or("no JSON object in the answer")?;
    if end < start {
        return Err("no JSON object in the answer".into());
    }
    let v: serde_json::Value =
        serde_json::from_str(&raw[start..=end]).map_err(|e| format!("invalid JSON: {e}"))?;
    match v.get("answer") {
        Some(serde_json::Value::String(s)) => Ok(s.clone()),
        Some(_) => Err("\"answer\" is not a string".into()),
        None => Err("missing key \"answer\"".into()),
    }
}
