//! Chat-completions HTTP adapter.
//!
//! Request body: `{"model", "messages": [{"role", "content"}], "temperature",
//! "max_tokens", ...extra}` posted to `{base_url}/chat/completions`.
//! Response: `choices[0].message.content`, `choices[0].finish_reason`
//! (`"stop"` or `"length"`), `usage.prompt_tokens`, `usage.completion_tokens`.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ChatReply, ChatRequest, ChatTransport, Finish, TransportError, Usage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpConfig {
    /// Base URL such as `http://gpu-07:8000/v1`.
    pub base_url: String,
    /// Name of the environment variable holding a bearer token, if any.
    #[serde(default)]
    pub token_env: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    300
}

pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
    token: Option<String>,
}

impl HttpTransport {
    pub fn new(cfg: &HttpConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build();
        let token = cfg
            .token_env
            .as_deref()
            .and_then(|name| std::env::var(name).ok());
        HttpTransport {
            agent,
            url: format!("{}/chat/completions", cfg.base_url.trim_end_matches('/')),
            token,
        }
    }

    fn body(req: &ChatRequest) -> Value {
        let mut body = json!({
            "model": req.model_name,
            "messages": req.messages,
            "temperature": req.decode.temperature,
            "max_tokens": req.decode.max_output_tokens,
        });
        if let Value::Object(map) = &mut body {
            for (k, v) in &req.extra {
                map.insert(k.clone(), v.clone());
            }
        }
        body
    }
}

fn parse_response(v: &Value) -> Result<ChatReply, TransportError> {
    let choice = v
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| TransportError::Fatal("response has no choices".into()))?;
    let content = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let finish = match choice.get("finish_reason").and_then(Value::as_str) {
        Some("length") => Finish::Length,
        _ => Finish::Stop,
    };
    let usage = Usage {
        input_tokens: v.pointer("/usage/prompt_tokens").and_then(Value::as_u64).unwrap_or(0),
        output_tokens: v
            .pointer("/usage/completion_tokens")
            .and_then(Value::as_u64)
            .unwrap_or(0),
    };
    Ok(ChatReply {
        content,
        finish,
        usage,
        attempts: 1,
        error: None,
    })
}

impl ChatTransport for HttpTransport {
    fn send(&self, req: &ChatRequest) -> Result<ChatReply, TransportError> {
        let mut call = self.agent.post(&self.url);
        if let Some(token) = &self.token {
            call = call.set("Authorization", &format!("Bearer {token}"));
        }
        match call.send_json(Self::body(req)) {
            Ok(resp) => {
                let v: Value = resp
                    .into_json()
                    .map_err(|e| TransportError::Transient(format!("reading body: {e}")))?;
                parse_response(&v)
            }
            Err(ureq::Error::Status(code, resp)) => {
                let detail = resp.into_string().unwrap_or_default();
                let msg = format!("HTTP {code}: {}", detail.chars().take(200).collect::<String>());
                if code == 408 || code == 429 || code >= 500 {
                    Err(TransportError::Transient(msg))
                } else {
                    Err(TransportError::Fatal(msg))
                }
            }
            Err(ureq::Error::Transport(t)) => Err(TransportError::Transient(t.to_string())),
        }
    }
}
