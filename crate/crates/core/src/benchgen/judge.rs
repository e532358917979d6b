use std::collections::BTreeMap;

use serde_json::Value;

use super::item::McqItem;
use crate::model_client::{last_json_object, ChatModel, ChatRequest};
use crate::prompts::Template;

pub const JUDGE_MALFORMED: &str = "judge_malformed";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JudgeVerdict {
    Pass,
    Fail(String),
}

impl JudgeVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, JudgeVerdict::Pass)
    }
}

/// `is_valid` from the last JSON object in a judge reply. Reasoning before
/// the object is ignored.
pub fn parse_judge(reply: &str) -> Option<JudgeVerdict> {
    let obj = last_json_object(reply)?;
    let valid = match obj.get("is_valid")? {
        Value::Bool(b) => *b,
        Value::String(s) if s.eq_ignore_ascii_case("true") => true,
        Value::String(s) if s.eq_ignore_ascii_case("false") => false,
        _ => return None,
    };
    if valid {
        return Some(JudgeVerdict::Pass);
    }
    let why = obj
        .get("overall_assessment")
        .and_then(Value::as_str)
        .unwrap_or("is_valid=false");
    Some(JudgeVerdict::Fail(why.to_string()))
}

/// Sends `prompt`; a transport error or unparsable reply gets `retries` more tries.
fn judge(prompt: String, client: &dyn ChatModel, base: &ChatRequest, retries: u32) -> JudgeVerdict {
    let mut req = base.clone();
    req.messages[0].content = prompt;
    for _ in 0..=retries {
        let reply = client.chat(&req);
        if reply.is_error() {
            continue;
        }
        if let Some(v) = parse_judge(&reply.content) {
            return v;
        }
    }
    JudgeVerdict::Fail(JUDGE_MALFORMED.into())
}

/// Independence check. The judge sees the question alone.
pub fn completeness_filter(item: &McqItem, client: &dyn ChatModel, base: &ChatRequest, retries: u32) -> JudgeVerdict {
    judge(Template::mcq_completeness().fill(&item.judge_json()), client, base, retries)
}

/// Support check against the source segment.
pub fn correctness_filter(
    item: &McqItem,
    segment: &str,
    client: &dyn ChatModel,
    base: &ChatRequest,
    retries: u32,
) -> JudgeVerdict {
    let qa = item.judge_json();
    let prompt = Template::mcq_correctness()
        .render(&BTreeMap::from([("text", segment), ("extracted_json_qa", qa.as_str())]))
        .expect("packaged template slots");
    judge(prompt, client, base, retries)
}
