use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatReply, ChatRequest, ChatTransport, TransportError};

/// One scripted outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScriptStep {
    Reply(String),
    /// Reply cut off at the output limit.
    Truncated(String),
    Transient(String),
    Fatal(String),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptFile {
    #[serde(default)]
    replies: HashMap<String, String>,
    #[serde(default)]
    rules: Vec<Rule>,
    #[serde(default)]
    sequence: Vec<ScriptStep>,
    #[serde(default)]
    default: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Rule {
    contains: String,
    reply: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("cannot read script {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid script {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
}

/// Mock backend.
///
/// Resolution order per request: the next queued sequence step, then an exact
/// prompt-hash match, then the first rule whose needle occurs in the prompt,
/// then the default reply. With none of these, the request fails fatally.
#[derive(Debug, Default)]
pub struct ScriptedTransport {
    by_hash: HashMap<String, String>,
    rules: Vec<Rule>,
    sequence: Mutex<VecDeque<ScriptStep>>,
    default: Option<String>,
    calls: AtomicUsize,
}

impl ScriptedTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_sequence(steps: Vec<ScriptStep>) -> Self {
        ScriptedTransport {
            sequence: Mutex::new(steps.into()),
            ..Default::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let file: ScriptFile = serde_json::from_str(text)?;
        Ok(ScriptedTransport {
            by_hash: file.replies,
            rules: file.rules,
            sequence: Mutex::new(file.sequence.into()),
            default: file.default,
            calls: AtomicUsize::new(0),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ScriptError> {
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ScriptError::Io {
            path: display.clone(),
            source,
        })?;
        Self::from_json(&text).map_err(|source| ScriptError::Parse {
            path: display,
            source,
        })
    }

    /// Scripts `reply` for the exact prompt (sent as one user message).
    pub fn with_reply(mut self, prompt: &str, reply: impl Into<String>) -> Self {
        self.by_hash
            .insert(super::prompt_hash(prompt), reply.into());
        self
    }

    pub fn with_rule(mut self, contains: impl Into<String>, reply: impl Into<String>) -> Self {
        self.rules.push(Rule {
            contains: contains.into(),
            reply: reply.into(),
        });
        self
    }

    pub fn with_default(mut self, reply: impl Into<String>) -> Self {
        self.default = Some(reply.into());
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatTransport for ScriptedTransport {
    fn send(&self, req: &ChatRequest) -> Result<ChatReply, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if let Some(step) = self.sequence.lock().unwrap().pop_front() {
            return match step {
                ScriptStep::Reply(text) => Ok(ChatReply::stop(text)),
                ScriptStep::Truncated(text) => Ok(ChatReply::truncated(text)),
                ScriptStep::Transient(msg) => Err(TransportError::Transient(msg)),
                ScriptStep::Fatal(msg) => Err(TransportError::Fatal(msg)),
            };
        }
        if let Some(text) = self.by_hash.get(&req.prompt_hash()) {
            return Ok(ChatReply::stop(text.clone()));
        }
        let prompt = req.prompt();
        if let Some(rule) = self.rules.iter().find(|r| prompt.contains(&r.contains)) {
            return Ok(ChatReply::stop(rule.reply.clone()));
        }
        match &self.default {
            Some(text) => Ok(ChatReply::stop(text.clone())),
            None => Err(TransportError::Fatal(format!(
                "no scripted reply for prompt {}",
                req.prompt_hash()
            ))),
        }
    }
}
