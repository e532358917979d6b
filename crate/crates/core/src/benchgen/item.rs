use serde::{Deserialize, Serialize};

pub const INCORRECT_FIELDS: [&str; 6] = [
    "incorrect_option_1",
    "incorrect_option_2",
    "incorrect_option_3",
    "incorrect_option_4",
    "incorrect_option_5",
    "incorrect_option_6",
];

/// A seven-option question grounded in one source segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "McqRecord", from = "McqRecord")]
pub struct McqItem {
    pub question: String,
    pub correct_option: String,
    pub incorrect_options: [String; 6],
    pub reference: String,
    pub source_doc_id: String,
    pub source_segment_index: usize,
}

/// Flat line-delimited form with the generator's field names.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct McqRecord {
    question: String,
    correct_option: String,
    reference: String,
    incorrect_option_1: String,
    incorrect_option_2: String,
    incorrect_option_3: String,
    incorrect_option_4: String,
    incorrect_option_5: String,
    incorrect_option_6: String,
    source_doc_id: String,
    source_segment_index: usize,
}

impl From<McqItem> for McqRecord {
    fn from(m: McqItem) -> Self {
        let [a, b, c, d, e, f] = m.incorrect_options;
        McqRecord {
            question: m.question,
            correct_option: m.correct_option,
            reference: m.reference,
            incorrect_option_1: a,
            incorrect_option_2: b,
            incorrect_option_3: c,
            incorrect_option_4: d,
            incorrect_option_5: e,
            incorrect_option_6: f,
            source_doc_id: m.source_doc_id,
            source_segment_index: m.source_segment_index,
        }
    }
}

impl From<McqRecord> for McqItem {
    fn from(r: McqRecord) -> Self {
        McqItem {
            question: r.question,
            correct_option: r.correct_option,
            incorrect_options: [
                r.incorrect_option_1,
                r.incorrect_option_2,
                r.incorrect_option_3,
                r.incorrect_option_4,
                r.incorrect_option_5,
                r.incorrect_option_6,
            ],
            reference: r.reference,
            source_doc_id: r.source_doc_id,
            source_segment_index: r.source_segment_index,
        }
    }
}

impl McqItem {
    /// Correct option first, then the six distractors in order.
    pub fn options(&self) -> Vec<&str> {
        std::iter::once(self.correct_option.as_str())
            .chain(self.incorrect_options.iter().map(String::as_str))
            .collect()
    }

    /// Pairwise distinct after trimming and case folding.
    pub fn options_distinct(&self) -> bool {
        let mut seen: Vec<String> = self.options().iter().map(|o| o.trim().to_lowercase()).collect();
        seen.sort();
        seen.dedup();
        seen.len() == 7
    }

    /// The question as shown to the judges: generator fields only.
    pub fn judge_json(&self) -> String {
        let mut m = serde_json::Map::new();
        m.insert("question".into(), self.question.clone().into());
        m.insert("correct_option".into(), self.correct_option.clone().into());
        for (k, v) in INCORRECT_FIELDS.iter().zip(&self.incorrect_options) {
            m.insert((*k).into(), v.clone().into());
        }
        m.insert("reference".into(), self.reference.clone().into());
        serde_json::to_string_pretty(&m).expect("string map")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample() -> McqItem {
        McqItem {
            question: "q?".into(),
            correct_option: "right".into(),
            incorrect_options: ["a", "b", "c", "d", "e", "f"].map(String::from),
            reference: "ref".into(),
            source_doc_id: "doc".into(),
            source_segment_index: 2,
        }
    }

    #[test]
    fn flat_field_names() {
        let v = serde_json::to_value(sample()).unwrap();
        assert_eq!(v["incorrect_option_6"], "f");
        assert_eq!(v["correct_option"], "right");
        assert!(v.get("incorrect_options").is_none());
        let back: McqItem = serde_json::from_value(v).unwrap();
        assert_eq!(back, sample());
    }

    #[test]
    fn distinct_is_case_insensitive() {
        let mut m = sample();
        assert!(m.options_distinct());
        m.incorrect_options[0] = " RIGHT ".into();
        assert!(!m.options_distinct());
    }

    #[test]
    fn judge_view_omits_provenance() {
        let j = sample().judge_json();
        assert!(j.contains("incorrect_option_1"));
        assert!(!j.contains("source_doc_id"));
    }
}
