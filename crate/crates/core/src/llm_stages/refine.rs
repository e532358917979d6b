use serde::{Deserialize, Serialize};

use super::chunk::{Chunk, ChunkUnit};
use super::repetition::detect_repetition;
use crate::model_client::{ChatModel, ChatReply, ChatRequest};
use crate::prompts::Template;

pub const OPEN_TAG: &str = "<CLEANED_TEXT>";
pub const CLOSE_TAG: &str = "</CLEANED_TEXT>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChunkFailure {
    Malformed,
    Repetition,
    Transport,
    Empty,
}

impl ChunkFailure {
    pub fn as_str(self) -> &'static str {
        match self {
            ChunkFailure::Malformed => "malformed",
            ChunkFailure::Repetition => "repetition",
            ChunkFailure::Transport => "transport",
            ChunkFailure::Empty => "empty",
        }
    }
}

/// Per-call settings shared by both stages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallParams {
    pub model_name: String,
    pub max_run: usize,
    /// Output budget as a multiple of the input token estimate.
    pub output_factor: u32,
}

/// Body between the first open tag and the next close tag.
pub fn extract_cleaned(reply: &str) -> Option<&str> {
    let start = reply.find(OPEN_TAG)? + OPEN_TAG.len();
    let len = reply[start..].find(CLOSE_TAG)?;
    Some(&reply[start..start + len])
}

/// Puts `body` (trimmed) inside the original chunk's leading and trailing
/// whitespace, so paragraph breaks at chunk cuts survive the rewrite.
pub fn reframe(original: &str, body: &str) -> String {
    let body = body.trim();
    if body.is_empty() {
        return String::new();
    }
    let lead = &original[..original.len() - original.trim_start().len()];
    let trail = &original[original.trim_end().len()..];
    format!("{lead}{body}{trail}")
}

fn input_estimate(chunk: &Chunk) -> u32 {
    let est = match chunk.unit {
        ChunkUnit::Chars => chunk.text.chars().count().div_ceil(4),
        ChunkUnit::Tokens => chunk.span.1 - chunk.span.0,
    };
    est.max(16) as u32
}

fn request(chunk: &Chunk, prompt: String, params: &CallParams) -> ChatRequest {
    let budget = input_estimate(chunk).saturating_mul(params.output_factor);
    ChatRequest::user(&params.model_name, prompt).with_max_output_tokens(budget)
}

/// One call with one immediate retry if the transport failed.
fn call(client: &dyn ChatModel, req: &ChatRequest) -> ChatReply {
    let reply = client.chat(req);
    if reply.is_error() {
        return client.chat(req);
    }
    reply
}

/// L4: cleaned text for a character chunk. An empty tag body is a valid
/// result meaning the whole chunk is deleted.
pub fn refine_chunk_l4(chunk: &Chunk, client: &dyn ChatModel, params: &CallParams) -> Result<String, ChunkFailure> {
    debug_assert_eq!(chunk.unit, ChunkUnit::Chars);
    let req = request(chunk, Template::l4_refine().fill(&chunk.text), params);
    let reply = call(client, &req);
    if reply.is_error() {
        return Err(ChunkFailure::Transport);
    }
    if detect_repetition(&reply.content, params.max_run) {
        return Err(ChunkFailure::Repetition);
    }
    let body = extract_cleaned(&reply.content).ok_or(ChunkFailure::Malformed)?;
    Ok(reframe(&chunk.text, body))
}

/// L5: the whole reply, trimmed, is the rewritten chunk.
pub fn complete_chunk_l5(chunk: &Chunk, client: &dyn ChatModel, params: &CallParams) -> Result<String, ChunkFailure> {
    debug_assert_eq!(chunk.unit, ChunkUnit::Tokens);
    let req = request(chunk, Template::l5_complete().fill(&chunk.text), params);
    let reply = call(client, &req);
    if reply.is_error() {
        return Err(ChunkFailure::Transport);
    }
    if reply.content.trim().is_empty() {
        return Err(ChunkFailure::Empty);
    }
    if detect_repetition(&reply.content, params.max_run) {
        return Err(ChunkFailure::Repetition);
    }
    Ok(reframe(&chunk.text, &reply.content))
}
