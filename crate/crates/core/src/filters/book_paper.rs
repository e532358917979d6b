use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::{DocType, Document};
use crate::model_client::{strict_json_object, ChatModel, ChatRequest};
use crate::prompts::Template;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BookPaperConfig {
    pub model_name: String,
    pub max_attempts: u32,
    /// Characters taken from the start and again from the middle of the text.
    pub excerpt_chars: usize,
    pub max_output_tokens: u32,
}

impl Default for BookPaperConfig {
    fn default() -> Self {
        BookPaperConfig {
            model_name: "classifier".into(),
            max_attempts: 3,
            excerpt_chars: 2000,
            max_output_tokens: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BookPaperVerdict {
    /// The document already carried a type; no call was made.
    Metadata(DocType),
    Classified { doc_type: DocType, attempts: u32 },
    Failed { reason: String, attempts: u32 },
}

impl BookPaperVerdict {
    pub fn doc_type(&self) -> Option<DocType> {
        match self {
            BookPaperVerdict::Metadata(t) | BookPaperVerdict::Classified { doc_type: t, .. } => Some(*t),
            BookPaperVerdict::Failed { .. } => None,
        }
    }
}

pub const FAILED: &str = "book_paper_failed";

/// The first `n` characters, then `n` characters centred on the middle of the
/// text. Texts up to `2n` characters are used whole.
pub fn excerpt(text: &str, n: usize) -> String {
    let total = text.chars().count();
    if total <= 2 * n {
        return text.to_string();
    }
    let byte_at = |k: usize| text.char_indices().nth(k).map_or(text.len(), |(b, _)| b);
    let head_end = byte_at(n);
    let mid_start = (total / 2).saturating_sub(n / 2).max(n);
    let (a, b) = (byte_at(mid_start), byte_at(mid_start + n));
    format!("{}\n\n[...]\n\n{}", &text[..head_end], &text[a..b])
}

/// Parses `{"analysis": string, "is_article": bool}`.
pub fn parse_reply(reply: &str) -> Result<DocType, &'static str> {
    let obj = strict_json_object(reply).ok_or("not_json")?;
    if !obj.get("analysis").is_some_and(Value::is_string) {
        return Err("missing_analysis");
    }
    match obj.get("is_article") {
        Some(Value::Bool(true)) => Ok(DocType::Paper),
        Some(Value::Bool(false)) => Ok(DocType::Book),
        _ => Err("missing_is_article"),
    }
}

/// Labels a document as book or paper. Documents whose type is already known
/// bypass the model.
pub fn classify_book_paper(doc: &Document, client: &dyn ChatModel, cfg: &BookPaperConfig) -> BookPaperVerdict {
    if doc.doc_type != DocType::Unknown {
        return BookPaperVerdict::Metadata(doc.doc_type);
    }
    let prompt = Template::book_paper().fill(&excerpt(doc.text(), cfg.excerpt_chars));
    let req = ChatRequest::user(&cfg.model_name, prompt).with_max_output_tokens(cfg.max_output_tokens);
    let mut reason = String::from("no_attempts");
    for attempt in 1..=cfg.max_attempts {
        let reply = client.chat(&req);
        if reply.is_error() {
            reason = "transport".into();
            continue;
        }
        match parse_reply(&reply.content) {
            Ok(doc_type) => return BookPaperVerdict::Classified { doc_type, attempts: attempt },
            Err(r) => {
                log::debug!("{}: book/paper attempt {attempt}: {r}", doc.id);
                reason = r.into();
            }
        }
    }
    BookPaperVerdict::Failed {
        reason,
        attempts: cfg.max_attempts,
    }
}

/// Applies a verdict: sets the type, or marks the document failed.
pub fn apply_verdict(doc: &mut Document, verdict: &BookPaperVerdict) {
    match verdict.doc_type() {
        Some(t) => doc.doc_type = t,
        None => doc.fail_with(FAILED),
    }
}
