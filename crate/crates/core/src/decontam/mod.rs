//! Exact n-gram decontamination against benchmark samples.

mod cache;

use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_128;

use crate::corpus::{Document, StageOutput, StageReport, Tokenizer};

pub use cache::{read_index, write_index};

pub const DROP_REASON: &str = "contaminated";
pub const DEFAULT_N: usize = 20;

/// One benchmark record; its problem and solution are indexed together.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkSample {
    #[serde(default)]
    pub id: Option<String>,
    pub problem: String,
    pub solution: String,
}

impl BenchmarkSample {
    pub fn new(problem: &str, solution: &str) -> Self {
        BenchmarkSample {
            id: None,
            problem: problem.into(),
            solution: solution.into(),
        }
    }

    pub fn text(&self) -> String {
        format!("{}\n{}", self.problem, self.solution)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DecontamError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Record { line: usize, msg: String },
    #[error("index cache: {0}")]
    Cache(String),
    #[error("gram size must be at least 1")]
    ZeroN,
}

/// Reads `{problem, solution}` records, one per line. Blank lines are skipped.
pub fn read_samples<R: BufRead>(reader: R) -> Result<Vec<BenchmarkSample>, DecontamError> {
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s = serde_json::from_str(&line).map_err(|e| DecontamError::Record {
            line: k + 1,
            msg: e.to_string(),
        })?;
        out.push(s);
    }
    Ok(out)
}

/// Hash of a token sequence; tokens are length-prefixed so boundaries count.
pub fn gram_hash(tokens: &[&str], buf: &mut Vec<u8>) -> u128 {
    buf.clear();
    for t in tokens {
        buf.extend_from_slice(&(t.len() as u32).to_le_bytes());
        buf.extend_from_slice(t.as_bytes());
    }
    xxh3_128(buf)
}

fn token_strs<'a>(text: &'a str, tokenizer: &dyn Tokenizer) -> Vec<&'a str> {
    tokenizer.spans(text).into_iter().map(|r| &text[r]).collect()
}

/// Hashed n-grams of benchmark samples.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NGramIndex {
    pub n: usize,
    pub grams: HashSet<u128>,
    /// Samples shorter than `n` tokens, whole, keyed by their token length.
    pub short: BTreeMap<usize, HashSet<u128>>,
    pub sample_count: usize,
}

impl NGramIndex {
    pub fn new(n: usize) -> Result<Self, DecontamError> {
        if n == 0 {
            return Err(DecontamError::ZeroN);
        }
        Ok(NGramIndex {
            n,
            ..Default::default()
        })
    }

    pub fn build(samples: &[BenchmarkSample], n: usize, tokenizer: &dyn Tokenizer) -> Result<Self, DecontamError> {
        let mut idx = Self::new(n)?;
        for s in samples {
            idx.add(s, tokenizer);
        }
        Ok(idx)
    }

    pub fn add(&mut self, sample: &BenchmarkSample, tokenizer: &dyn Tokenizer) {
        let text = sample.text();
        let toks = token_strs(&text, tokenizer);
        let mut buf = Vec::new();
        self.sample_count += 1;
        if toks.is_empty() {
            return;
        }
        if toks.len() < self.n {
            self.short
                .entry(toks.len())
                .or_default()
                .insert(gram_hash(&toks, &mut buf));
        } else {
            for w in toks.windows(self.n) {
                self.grams.insert(gram_hash(w, &mut buf));
            }
        }
    }

    /// Distinct stored grams, short-sample grams included.
    pub fn len(&self) -> usize {
        self.grams.len() + self.short.values().map(HashSet::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Token offset of the first indexed gram found in `text`.
    pub fn first_match(&self, text: &str, tokenizer: &dyn Tokenizer) -> Option<usize> {
        let toks = token_strs(text, tokenizer);
        let mut buf = Vec::new();
        let mut best: Option<usize> = None;
        if !self.grams.is_empty() {
            best = toks
                .windows(self.n)
                .position(|w| self.grams.contains(&gram_hash(w, &mut buf)));
        }
        for (&len, set) in &self.short {
            let limit = best.unwrap_or(usize::MAX);
            if let Some(p) = toks
                .windows(len)
                .take(limit)
                .position(|w| set.contains(&gram_hash(w, &mut buf)))
            {
                best = Some(best.map_or(p, |b| b.min(p)));
            }
        }
        best
    }

    pub fn is_contaminated(&self, text: &str, tokenizer: &dyn Tokenizer) -> bool {
        self.first_match(text, tokenizer).is_some()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecontamReport {
    pub input: usize,
    pub removed: usize,
    pub removal_rate: f64,
    pub contaminated: Vec<String>,
}

/// Drops every active document sharing an indexed gram.
pub fn decontaminate(
    mut docs: Vec<Document>,
    idx: &NGramIndex,
    tokenizer: &dyn Tokenizer,
) -> (StageOutput, DecontamReport) {
    let hits: Vec<bool> = docs
        .par_iter()
        .map(|d| d.is_active() && idx.is_contaminated(d.text(), tokenizer))
        .collect();
    let mut report = StageReport::new("decontam");
    let mut contaminated = Vec::new();
    for (doc, hit) in docs.iter_mut().zip(hits) {
        if !doc.is_active() {
            continue;
        }
        if hit {
            doc.drop_with(DROP_REASON);
            contaminated.push(doc.id.clone());
        }
        report.record(doc);
    }
    let out = DecontamReport {
        input: report.input,
        removed: report.dropped,
        removal_rate: report.removal_rate(),
        contaminated,
    };
    (StageOutput { documents: docs, report }, out)
}
