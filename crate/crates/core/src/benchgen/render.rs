use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::item::McqItem;

pub const LABELS: [&str; 7] = ["A", "B", "C", "D", "E", "F", "G"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedOption {
    pub label: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedMcq {
    pub question: String,
    pub options: Vec<RenderedOption>,
    pub answer_label: String,
    pub shuffle_seed: u64,
    pub source_doc_id: String,
    pub source_segment_index: usize,
}

/// `perm[k]` is the item option index shown at label `k`. Seed 0 is the identity.
pub fn permutation(seed: u64) -> [usize; 7] {
    let mut p = [0, 1, 2, 3, 4, 5, 6];
    if seed != 0 {
        p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    p
}

pub fn render(item: &McqItem, seed: u64) -> RenderedMcq {
    let opts = item.options();
    let perm = permutation(seed);
    let options = perm
        .iter()
        .zip(LABELS)
        .map(|(&i, l)| RenderedOption {
            label: l.into(),
            text: opts[i].into(),
        })
        .collect();
    let answer = perm.iter().position(|&i| i == 0).expect("permutation contains 0");
    RenderedMcq {
        question: item.question.clone(),
        options,
        answer_label: LABELS[answer].into(),
        shuffle_seed: seed,
        source_doc_id: item.source_doc_id.clone(),
        source_segment_index: item.source_segment_index,
    }
}

impl RenderedMcq {
    /// Options back in item order: correct first, then distractors 1..6.
    pub fn unshuffled(&self) -> Vec<&str> {
        let perm = permutation(self.shuffle_seed);
        let mut out = vec![""; 7];
        for (k, &i) in perm.iter().enumerate() {
            out[i] = &self.options[k].text;
        }
        out
    }

    /// Plain-text layout: question, labeled options, answer line.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\nOptions:\n", self.question);
        for o in &self.options {
            s.push_str(&format!("{}. {}\n", o.label, o.text));
        }
        s.push_str(&format!("Answer: {}", self.answer_label));
        s
    }
}
