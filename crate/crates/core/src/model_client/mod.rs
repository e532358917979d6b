//! Chat-model and classifier interfaces.
//!
//! Every model call in the crate goes through [`ChatModel`] or
//! [`LabelClassifier`]. Backends are either scripted (tests, dry runs) or the
//! chat-completions HTTP adapter; retries and backoff live in
//! [`RetryingClient`] and are shared by both.

mod classifier;
mod http;
mod parse;
mod retry;
mod scripted;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use classifier::{
    default_dimensions, ClassifyError, FnClassifier, LabelClassifier, LabelSet, ScriptedClassifier,
    DEFAULT_DIMENSIONS,
};
pub use http::{HttpConfig, HttpTransport};
pub use parse::{last_json_object, strict_json_object, strip_code_fence, strip_reasoning};
pub use retry::{BackoffPolicy, NoSleep, RecordingSleeper, RetryingClient, Sleeper, ThreadSleeper};
pub use scripted::{ScriptError, ScriptStep, ScriptedTransport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for DecodeParams {
    fn default() -> Self {
        DecodeParams {
            temperature: 0.0,
            max_output_tokens: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<Message>,
    pub decode: DecodeParams,
    pub model_name: String,
    /// Backend-specific switches (e.g. reasoning modes), passed through verbatim.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl ChatRequest {
    /// A single user message with deterministic decoding.
    pub fn user(model_name: impl Into<String>, prompt: impl Into<String>) -> Self {
        ChatRequest {
            messages: vec![Message {
                role: Role::User,
                content: prompt.into(),
            }],
            decode: DecodeParams::default(),
            model_name: model_name.into(),
            extra: BTreeMap::new(),
        }
    }

    pub fn with_max_output_tokens(mut self, n: u32) -> Self {
        self.decode.max_output_tokens = n;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.messages.iter().any(|m| m.role == Role::User) {
            return Err("request needs at least one user message".into());
        }
        if !(self.decode.temperature >= 0.0) {
            return Err("temperature must be >= 0".into());
        }
        Ok(())
    }

    /// Text of the last user message.
    pub fn prompt(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map_or("", |m| m.content.as_str())
    }

    /// Hex SHA-256 over the role-tagged messages; keys scripted replies.
    pub fn prompt_hash(&self) -> String {
        let mut h = Sha256::new();
        for m in &self.messages {
            h.update(match m.role {
                Role::System => b"system\x00".as_slice(),
                Role::User => b"user\x00".as_slice(),
            });
            h.update(m.content.as_bytes());
            h.update(b"\x00");
        }
        hex_lower(&h.finalize())
    }
}

pub(crate) fn hex_lower(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of a prompt sent as a single user message.
pub fn prompt_hash(prompt: &str) -> String {
    ChatRequest::user("", prompt).prompt_hash()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Finish {
    Stop,
    /// Output hit the token limit; the content may be truncated.
    Length,
    Error,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatReply {
    pub content: String,
    pub finish: Finish,
    pub usage: Usage,
    /// Transport attempts spent on this reply, including the successful one.
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ChatReply {
    pub fn stop(content: impl Into<String>) -> Self {
        ChatReply {
            content: content.into(),
            finish: Finish::Stop,
            usage: Usage::default(),
            attempts: 1,
            error: None,
        }
    }

    pub fn truncated(content: impl Into<String>) -> Self {
        ChatReply {
            finish: Finish::Length,
            ..Self::stop(content)
        }
    }

    pub fn failed(error: impl Into<String>) -> Self {
        ChatReply {
            content: String::new(),
            finish: Finish::Error,
            usage: Usage::default(),
            attempts: 1,
            error: Some(error.into()),
        }
    }

    pub fn is_error(&self) -> bool {
        self.finish == Finish::Error
    }
}

/// One reply per request. Failures come back as `Finish::Error` replies.
pub trait ChatModel: Send + Sync {
    fn chat(&self, req: &ChatRequest) -> ChatReply;
}

impl<F> ChatModel for F
where
    F: Fn(&ChatRequest) -> ChatReply + Send + Sync,
{
    fn chat(&self, req: &ChatRequest) -> ChatReply {
        self(req)
    }
}

impl<M: ChatModel + ?Sized> ChatModel for Arc<M> {
    fn chat(&self, req: &ChatRequest) -> ChatReply {
        (**self).chat(req)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("transient transport failure: {0}")]
    Transient(String),
    #[error("protocol error: {0}")]
    Fatal(String),
}

/// A single attempt against a backend, without retries.
pub trait ChatTransport: Send + Sync {
    fn send(&self, req: &ChatRequest) -> Result<ChatReply, TransportError>;
}
