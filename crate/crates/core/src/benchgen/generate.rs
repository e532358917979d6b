use serde_json::{Map, Value};

use super::item::{McqItem, INCORRECT_FIELDS};
use crate::model_client::{strict_json_object, strip_reasoning, ChatModel, ChatRequest};
use crate::prompts::Template;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Generated {
    Item(McqItem),
    NoQa,
    Failed(GenFailure),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GenFailure {
    Transport,
    Malformed,
    Schema,
    DegenerateOptions,
    UngroundedReference,
}

impl GenFailure {
    pub fn as_str(self) -> &'static str {
        match self {
            GenFailure::Transport => "transport",
            GenFailure::Malformed => "malformed",
            GenFailure::Schema => "schema",
            GenFailure::DegenerateOptions => "degenerate_options",
            GenFailure::UngroundedReference => "ungrounded_reference",
        }
    }
}

/// `No QA`, any case, alone or followed by whitespace or punctuation.
/// Surrounding quotes are ignored.
pub fn is_no_qa(reply: &str) -> bool {
    let t = reply.trim().trim_start_matches(['"', '\'', '`', '*']);
    let Some(head) = t.get(..5) else {
        return false;
    };
    if !head.eq_ignore_ascii_case("no qa") {
        return false;
    }
    t[5..].chars().next().map_or(true, |c| c.is_whitespace() || c.is_ascii_punctuation())
}

fn field(obj: &Map<String, Value>, key: &str) -> Result<String, GenFailure> {
    match obj.get(key) {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.clone()),
        _ => Err(GenFailure::Schema),
    }
}

/// Validates a parsed generator reply against its source segment.
pub fn item_from_json(
    obj: &Map<String, Value>,
    segment: &str,
    doc_id: &str,
    segment_index: usize,
) -> Result<McqItem, GenFailure> {
    let mut incorrect: [String; 6] = Default::default();
    for (slot, key) in incorrect.iter_mut().zip(INCORRECT_FIELDS) {
        *slot = field(obj, key)?;
    }
    let item = McqItem {
        question: field(obj, "question")?,
        correct_option: field(obj, "correct_option")?,
        incorrect_options: incorrect,
        reference: field(obj, "reference")?,
        source_doc_id: doc_id.into(),
        source_segment_index: segment_index,
    };
    if !item.options_distinct() {
        return Err(GenFailure::DegenerateOptions);
    }
    if !segment.contains(item.reference.as_str()) {
        return Err(GenFailure::UngroundedReference);
    }
    Ok(item)
}

pub fn parse_generation(reply: &str, segment: &str, doc_id: &str, segment_index: usize) -> Generated {
    let reply = strip_reasoning(reply);
    if is_no_qa(reply) {
        return Generated::NoQa;
    }
    match strict_json_object(reply) {
        None => Generated::Failed(GenFailure::Malformed),
        Some(obj) => match item_from_json(&obj, segment, doc_id, segment_index) {
            Ok(item) => Generated::Item(item),
            Err(f) => Generated::Failed(f),
        },
    }
}

pub fn generate_mcq(
    segment: &str,
    doc_id: &str,
    segment_index: usize,
    client: &dyn ChatModel,
    req_base: &ChatRequest,
) -> Generated {
    let mut req = req_base.clone();
    req.messages[0].content = Template::mcq_generate().fill(segment);
    let reply = client.chat(&req);
    if reply.is_error() {
        return Generated::Failed(GenFailure::Transport);
    }
    parse_generation(&reply.content, segment, doc_id, segment_index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_client::ChatReply;

    const SEG: &str = "Mitochondria produce ATP through oxidative phosphorylation across the inner membrane.";

    fn reply(reference: &str, wrong: &[&str; 6]) -> String {
        let mut m = serde_json::json!({
            "question": "Where does oxidative phosphorylation occur?",
            "correct_option": "Inner mitochondrial membrane",
            "reference": reference,
        });
        for (k, w) in INCORRECT_FIELDS.iter().zip(wrong) {
            m[*k] = Value::String(w.to_string());
        }
        m.to_string()
    }

    const WRONG: [&str; 6] = ["Nucleus", "Ribosome", "Cytosol", "Golgi body", "Lysosome", "Outer membrane"];

    #[test]
    fn no_qa_forms() {
        for r in ["No QA", "no qa", "  NO QA.\n", "\"No QA\"", "No QA - list only", "No QA"] {
            assert!(is_no_qa(r), "{r}");
        }
        for r in ["No QAs here", "{\"question\": \"No QA\"}", "", "No"] {
            assert!(!is_no_qa(r), "{r}");
        }
        assert_eq!(parse_generation("<think>hmm</think>\nNo QA", SEG, "d", 0), Generated::NoQa);
    }

    #[test]
    fn well_formed() {
        let g = parse_generation(&reply("across the inner membrane", &WRONG), SEG, "d", 3);
        let Generated::Item(item) = g else { panic!("{g:?}") };
        assert_eq!(item.source_segment_index, 3);
        assert_eq!(item.options().len(), 7);
        let fenced = format!("```json\n{}\n```", reply("ATP", &WRONG));
        assert!(matches!(parse_generation(&fenced, SEG, "d", 0), Generated::Item(_)));
    }

    #[test]
    fn failures() {
        let f = |r: &str| parse_generation(r, SEG, "d", 0);
        assert_eq!(f("Here is a question: what?"), Generated::Failed(GenFailure::Malformed));
        assert_eq!(f("{\"question\": \"q\"}"), Generated::Failed(GenFailure::Schema));
        assert_eq!(f(&reply("not in the text", &WRONG)), Generated::Failed(GenFailure::UngroundedReference));
        let dup = ["Nucleus", "Nucleus", "Cytosol", "Golgi body", "Lysosome", "Outer membrane"];
        assert_eq!(f(&reply("ATP", &dup)), Generated::Failed(GenFailure::DegenerateOptions));
        let dup_correct = ["Inner mitochondrial membrane", "Ribosome", "Cytosol", "Golgi body", "Lysosome", "x"];
        assert_eq!(f(&reply("ATP", &dup_correct)), Generated::Failed(GenFailure::DegenerateOptions));
    }

    #[test]
    fn prompt_carries_segment() {
        let client = |r: &ChatRequest| {
            assert!(r.prompt().ends_with(SEG));
            ChatReply::stop("No QA")
        };
        let base = ChatRequest::user("gen", "");
        assert_eq!(generate_mcq(SEG, "d", 0, &client, &base), Generated::NoQa);
        let down = |_: &ChatRequest| ChatReply::failed("x");
        assert_eq!(generate_mcq(SEG, "d", 0, &down, &base), Generated::Failed(GenFailure::Transport));
    }
}
