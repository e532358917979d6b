//! Seven-option benchmark construction from curated documents.
//!
//! Segments of up to 4096 tokens go to a generator model, which either
//! returns one question as JSON or `No QA`. Questions then pass an
//! independence judge (question only) and a support judge (question plus
//! segment). Survivors can be shuffled into A-G form and sampled.

mod generate;
mod item;
mod judge;
mod render;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use generate::{generate_mcq, is_no_qa, item_from_json, parse_generation, GenFailure, Generated};
pub use item::{McqItem, INCORRECT_FIELDS};
pub use judge::{completeness_filter, correctness_filter, parse_judge, JudgeVerdict, JUDGE_MALFORMED};
pub use render::{permutation, render, RenderedMcq, RenderedOption, LABELS};

use crate::corpus::{Document, Tokenizer};
use crate::llm_stages::{chunk_text, ChunkUnit};
use crate::model_client::{ChatModel, ChatRequest};

pub const QA_WINDOW: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchgenConfig {
    pub segment_tokens: usize,
    pub generator_model: String,
    pub judge_model: String,
    pub generator_max_tokens: u32,
    pub judge_max_tokens: u32,
    /// Extra request fields for the judges (e.g. a reasoning-mode switch).
    pub judge_extra: BTreeMap<String, serde_json::Value>,
    pub judge_retries: u32,
}

impl Default for BenchgenConfig {
    fn default() -> Self {
        BenchgenConfig {
            segment_tokens: QA_WINDOW,
            generator_model: "generator".into(),
            judge_model: "judge".into(),
            generator_max_tokens: 4096,
            judge_max_tokens: 4096,
            judge_extra: BTreeMap::new(),
            judge_retries: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub doc_id: String,
    pub index: usize,
    pub text: String,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BenchError {
    #[error("pool has {pool} items, {k} requested")]
    PoolTooSmall { pool: usize, k: usize },
}

/// Token windows of at most `window`, cut at paragraph breaks where possible.
/// Blank windows are skipped.
pub fn segment_for_qa(doc: &Document, window: usize, tokenizer: &dyn Tokenizer) -> Vec<Segment> {
    chunk_text(&doc.id, doc.text(), ChunkUnit::Tokens, window, tokenizer)
        .into_iter()
        .filter(|c| !c.text.trim().is_empty())
        .enumerate()
        .map(|(index, c)| Segment {
            doc_id: c.doc_id,
            index,
            text: c.text,
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchReport {
    pub documents: usize,
    pub segments: usize,
    pub no_qa: usize,
    pub generated: usize,
    pub generation_failures: BTreeMap<String, usize>,
    pub completeness_failed: usize,
    pub correctness_failed: usize,
    pub judge_malformed: usize,
    pub emitted: usize,
}

impl BenchReport {
    /// Every segment and every generated item is accounted for once.
    pub fn is_balanced(&self) -> bool {
        let failed: usize = self.generation_failures.values().sum();
        self.segments == self.no_qa + self.generated + failed
            && self.generated == self.completeness_failed + self.correctness_failed + self.emitted
    }
}

enum SegmentOutcome {
    NoQa,
    GenFailed(GenFailure),
    Completeness(JudgeVerdict),
    Correctness(JudgeVerdict),
    Emitted(McqItem),
}

fn process_segment(
    seg: &Segment,
    generator: &dyn ChatModel,
    judge: &dyn ChatModel,
    gen_req: &ChatRequest,
    judge_req: &ChatRequest,
    retries: u32,
) -> SegmentOutcome {
    let item = match generate_mcq(&seg.text, &seg.doc_id, seg.index, generator, gen_req) {
        Generated::NoQa => return SegmentOutcome::NoQa,
        Generated::Failed(f) => return SegmentOutcome::GenFailed(f),
        Generated::Item(item) => item,
    };
    let v = completeness_filter(&item, judge, judge_req, retries);
    if !v.passed() {
        return SegmentOutcome::Completeness(v);
    }
    let v = correctness_filter(&item, &seg.text, judge, judge_req, retries);
    if !v.passed() {
        return SegmentOutcome::Correctness(v);
    }
    SegmentOutcome::Emitted(item)
}

/// Runs generation and both filters over every active document.
pub fn build_pool(
    docs: &[Document],
    generator: &dyn ChatModel,
    judge: &dyn ChatModel,
    cfg: &BenchgenConfig,
    tokenizer: &dyn Tokenizer,
) -> (Vec<McqItem>, BenchReport) {
    let active: Vec<&Document> = docs.iter().filter(|d| d.is_active()).collect();
    let segments: Vec<Segment> = active
        .iter()
        .flat_map(|d| segment_for_qa(d, cfg.segment_tokens, tokenizer))
        .collect();
    let gen_req = ChatRequest::user(&cfg.generator_model, "").with_max_output_tokens(cfg.generator_max_tokens);
    let mut judge_req = ChatRequest::user(&cfg.judge_model, "").with_max_output_tokens(cfg.judge_max_tokens);
    judge_req.extra = cfg.judge_extra.clone();

    let outcomes: Vec<SegmentOutcome> = segments
        .par_iter()
        .map(|s| process_segment(s, generator, judge, &gen_req, &judge_req, cfg.judge_retries))
        .collect();

    let mut report = BenchReport {
        documents: active.len(),
        segments: segments.len(),
        ..Default::default()
    };
    let mut items = Vec::new();
    let note_judge = |report: &mut BenchReport, v: &JudgeVerdict| {
        if *v == JudgeVerdict::Fail(JUDGE_MALFORMED.into()) {
            report.judge_malformed += 1;
        }
    };
    for o in outcomes {
        match o {
            SegmentOutcome::NoQa => report.no_qa += 1,
            SegmentOutcome::GenFailed(f) => *report.generation_failures.entry(f.as_str().into()).or_default() += 1,
            SegmentOutcome::Completeness(v) => {
                report.generated += 1;
                report.completeness_failed += 1;
                note_judge(&mut report, &v);
            }
            SegmentOutcome::Correctness(v) => {
                report.generated += 1;
                report.correctness_failed += 1;
                note_judge(&mut report, &v);
            }
            SegmentOutcome::Emitted(item) => {
                report.generated += 1;
                report.emitted += 1;
                items.push(item);
            }
        }
    }
    (items, report)
}

/// Uniform sample of `k` items without replacement, kept in pool order.
pub fn sample_eval_set<T: Clone>(pool: &[T], k: usize, seed: u64) -> Result<Vec<T>, BenchError> {
    if k > pool.len() {
        return Err(BenchError::PoolTooSmall { pool: pool.len(), k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, pool.len(), k).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| pool[i].clone()).collect())
}

pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut w: W) -> std::io::Result<()> {
    for it in items {
        serde_json::to_writer(&mut w, it)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(r: R) -> std::io::Result<Vec<T>> {
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {}: {e}", k + 1))
        })?);
    }
    Ok(out)
}
