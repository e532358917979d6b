//! Versioned prompt templates.
//!
//! Templates are stored verbatim under `prompts/`. Two slot styles exist:
//! literal templates have one marker replaced textually (`[CHUNK]`,
//! `{chunk}`, `{text_sample}`), while format templates use `{name}` slots
//! with `{{`/`}}` escapes for literal braces.

use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotStyle {
    Literal,
    Format,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template {id}: slot {slot} must occur exactly once, found {found}")]
    SlotCount { id: String, slot: String, found: usize },
    #[error("template {id}: no value for slot {{{slot}}}")]
    MissingValue { id: String, slot: String },
    #[error("template {id}: unbalanced brace at byte {at}")]
    Brace { id: String, at: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub id: String,
    pub text: String,
    pub style: SlotStyle,
    /// Marker for literal templates; slot names for format templates.
    pub slots: Vec<String>,
}

pub const BOOK_PAPER_V1: &str = include_str!("../prompts/book_paper_v1.txt");
pub const L4_REFINE_V1: &str = include_str!("../prompts/l4_refine_v1.txt");
pub const L5_COMPLETE_V1: &str = include_str!("../prompts/l5_complete_v1.txt");
pub const MCQ_GENERATE_V1: &str = include_str!("../prompts/mcq_generate_v1.txt");
pub const MCQ_COMPLETENESS_V1: &str = include_str!("../prompts/mcq_completeness_v1.txt");
pub const MCQ_CORRECTNESS_V1: &str = include_str!("../prompts/mcq_correctness_v1.txt");

impl Template {
    pub fn literal(id: &str, text: &str, marker: &str) -> Result<Self, TemplateError> {
        let found = text.matches(marker).count();
        if found != 1 {
            return Err(TemplateError::SlotCount {
                id: id.into(),
                slot: marker.into(),
                found,
            });
        }
        Ok(Template {
            id: id.into(),
            text: text.into(),
            style: SlotStyle::Literal,
            slots: vec![marker.into()],
        })
    }

    pub fn format(id: &str, text: &str) -> Result<Self, TemplateError> {
        let mut slots = Vec::new();
        for piece in parse_format(id, text)? {
            if let Piece::Slot(name) = piece {
                if !slots.iter().any(|s| s == name) {
                    slots.push(name.to_string());
                }
            }
        }
        Ok(Template {
            id: id.into(),
            text: text.into(),
            style: SlotStyle::Format,
            slots,
        })
    }

    pub fn book_paper() -> Self {
        Self::literal("book_paper_v1", BOOK_PAPER_V1, "{text_sample}").expect("packaged template")
    }

    pub fn l4_refine() -> Self {
        Self::literal("l4_refine_v1", L4_REFINE_V1, "[CHUNK]").expect("packaged template")
    }

    pub fn l5_complete() -> Self {
        Self::literal("l5_complete_v1", L5_COMPLETE_V1, "{chunk}").expect("packaged template")
    }

    pub fn mcq_generate() -> Self {
        Self::format("mcq_generate_v1", MCQ_GENERATE_V1).expect("packaged template")
    }

    pub fn mcq_completeness() -> Self {
        Self::format("mcq_completeness_v1", MCQ_COMPLETENESS_V1).expect("packaged template")
    }

    pub fn mcq_correctness() -> Self {
        Self::format("mcq_correctness_v1", MCQ_CORRECTNESS_V1).expect("packaged template")
    }

    /// Fills a literal template's single slot.
    pub fn fill(&self, value: &str) -> String {
        match self.style {
            SlotStyle::Literal => self.text.replacen(&self.slots[0], value, 1),
            SlotStyle::Format => {
                let name = self.slots.first().map(String::as_str).unwrap_or("");
                self.render(&BTreeMap::from([(name, value)]))
                    .unwrap_or_else(|_| self.text.clone())
            }
        }
    }

    /// Recovers the slot value from a prompt produced by [`fill`](Self::fill)
    /// on a literal template.
    pub fn extract<'a>(&self, rendered: &'a str) -> Option<&'a str> {
        if self.style != SlotStyle::Literal {
            return None;
        }
        let (pre, post) = self.text.split_once(self.slots[0].as_str())?;
        let rest = rendered.strip_prefix(pre)?;
        rest.strip_suffix(post)
    }

    /// Substitutes named slots in one pass; inserted values are never re-scanned.
    pub fn render(&self, values: &BTreeMap<&str, &str>) -> Result<String, TemplateError> {
        match self.style {
            SlotStyle::Literal => {
                let marker = &self.slots[0];
                let v = values.get(marker.as_str()).ok_or_else(|| TemplateError::MissingValue {
                    id: self.id.clone(),
                    slot: marker.clone(),
                })?;
                Ok(self.text.replacen(marker.as_str(), v, 1))
            }
            SlotStyle::Format => {
                let mut out = String::with_capacity(self.text.len());
                for piece in parse_format(&self.id, &self.text)? {
                    match piece {
                        Piece::Text(t) => out.push_str(t),
                        Piece::Slot(name) => {
                            let v = values.get(name).ok_or_else(|| TemplateError::MissingValue {
                                id: self.id.clone(),
                                slot: name.into(),
                            })?;
                            out.push_str(v);
                        }
                    }
                }
                Ok(out)
            }
        }
    }
}

enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn parse_format<'a>(id: &str, text: &'a str) -> Result<Vec<Piece<'a>>, TemplateError> {
    let bytes = text.as_bytes();
    let mut pieces = Vec::new();
    let mut start = 0;
    let mut i = 0;
    let brace = |at| TemplateError::Brace { id: id.into(), at };
    while i < bytes.len() {
        match bytes[i] {
            b'{' | b'}' if bytes.get(i + 1) == Some(&bytes[i]) => {
                pieces.push(Piece::Text(&text[start..i + 1]));
                i += 2;
                start = i;
            }
            b'{' => {
                let close = text[i..].find('}').ok_or_else(|| brace(i))? + i;
                let name = &text[i + 1..close];
                if name.is_empty() || !name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') {
                    return Err(brace(i));
                }
                pieces.push(Piece::Text(&text[start..i]));
                pieces.push(Piece::Slot(name));
                i = close + 1;
                start = i;
            }
            b'}' => return Err(brace(i)),
            _ => i += 1,
        }
    }
    pieces.push(Piece::Text(&text[start..]));
    Ok(pieces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packaged_templates_parse() {
        assert_eq!(Template::mcq_generate().slots, vec!["chunk_text"]);
        assert_eq!(Template::mcq_completeness().slots, vec!["extracted_json_qa"]);
        assert_eq!(Template::mcq_correctness().slots, vec!["text", "extracted_json_qa"]);
        Template::book_paper();
        Template::l4_refine();
        Template::l5_complete();
    }

    #[test]
    fn literal_fill_is_verbatim_elsewhere() {
        let t = Template::l4_refine();
        let out = t.fill("CHUNK BODY");
        let (pre, post) = L4_REFINE_V1.split_once("[CHUNK]").unwrap();
        assert_eq!(out, format!("{pre}CHUNK BODY{post}"));
    }

    #[test]
    fn extract_inverts_fill() {
        let t = Template::l5_complete();
        assert_eq!(t.extract(&t.fill("body\n\n")), Some("body\n\n"));
        assert_eq!(t.extract("unrelated"), None);
        assert_eq!(Template::mcq_generate().extract("x"), None);
    }

    #[test]
    fn value_containing_marker_is_not_rescanned() {
        let t = Template::l5_complete();
        let out = t.fill("x {chunk} y");
        assert_eq!(out.matches("{chunk}").count(), 1);
        let g = Template::mcq_generate();
        let out = g.fill("{chunk_text} {{");
        assert!(out.ends_with("{chunk_text} {{"));
    }

    #[test]
    fn format_unescapes_braces() {
        let out = Template::mcq_completeness().fill("QA");
        assert!(out.contains("\n{\n  \"is_valid\": true/false,"));
        assert!(!out.contains("{{"));
        assert!(out.contains("**MCQ**\nQA\n"));
    }

    #[test]
    fn missing_value() {
        let t = Template::mcq_correctness();
        let err = t.render(&BTreeMap::from([("text", "a")])).unwrap_err();
        assert!(matches!(err, TemplateError::MissingValue { .. }));
    }

    #[test]
    fn literal_slot_must_be_unique() {
        assert!(Template::literal("x", "a [CHUNK] [CHUNK]", "[CHUNK]").is_err());
        assert!(Template::literal("x", "nothing", "[CHUNK]").is_err());
    }

    #[test]
    fn stray_brace_rejected() {
        assert!(Template::format("x", "a } b").is_err());
        assert!(Template::format("x", "a { b").is_err());
    }
}
