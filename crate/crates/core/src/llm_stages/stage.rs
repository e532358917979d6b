use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::chunk::{chunk_text, Chunk, ChunkStatus, ChunkUnit};
use super::refine::{complete_chunk_l5, refine_chunk_l4, CallParams, ChunkFailure};
use super::repetition::DEFAULT_MAX_RUN;
use crate::corpus::{DocType, Document, Level, Tokenizer};
use crate::model_client::ChatModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LlmStage {
    L4,
    L5,
}

impl LlmStage {
    pub fn level(self) -> Level {
        match self {
            LlmStage::L4 => Level::L4,
            LlmStage::L5 => Level::L5,
        }
    }

    pub fn prior(self) -> Level {
        match self {
            LlmStage::L4 => Level::L3,
            LlmStage::L5 => Level::L4,
        }
    }

    pub fn unit(self) -> ChunkUnit {
        match self {
            LlmStage::L4 => ChunkUnit::Chars,
            LlmStage::L5 => ChunkUnit::Tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StageConfig {
    pub window: usize,
    pub max_run: usize,
    /// Chunks of one document in flight at once.
    pub concurrency: usize,
    pub model_name: String,
    pub output_factor: u32,
    /// Minimum share of cleaned chunks, in percent.
    pub success_percent: u32,
}

impl StageConfig {
    pub fn l4() -> Self {
        StageConfig {
            window: 1024,
            max_run: DEFAULT_MAX_RUN,
            concurrency: 8,
            model_name: "teacher".into(),
            output_factor: 4,
            success_percent: 95,
        }
    }

    pub fn l5() -> Self {
        StageConfig { ..Self::l4() }
    }

    fn params(&self) -> CallParams {
        CallParams {
            model_name: self.model_name.clone(),
            max_run: self.max_run,
            output_factor: self.output_factor,
        }
    }
}

impl Default for StageConfig {
    fn default() -> Self {
        Self::l4()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Success,
    FailedRequeue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub doc_id: String,
    pub stage: LlmStage,
    pub total_chunks: usize,
    pub cleaned_chunks: usize,
    pub failed_chunks: usize,
    pub failures: BTreeMap<ChunkFailure, usize>,
    pub document_verdict: Verdict,
    pub output_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StageError {
    #[error("{id}: {stage:?} needs a document at {need}, found {found}")]
    WrongStage {
        id: String,
        stage: LlmStage,
        need: Level,
        found: Level,
    },
    #[error("{id}: L5 runs on papers only, got {doc_type}")]
    NotAPaper { id: String, doc_type: &'static str },
    #[error("{id}: document is not active")]
    Inactive { id: String },
}

pub const QC_FAILED: &str = "qc_below_threshold";

/// Integer form of `cleaned / total >= percent / 100`; an empty document passes.
pub fn meets_threshold(cleaned: usize, total: usize, percent: u32) -> bool {
    cleaned * 100 >= total * percent as usize
}

pub fn check_preconditions(doc: &Document, stage: LlmStage) -> Result<(), StageError> {
    if !doc.is_active() {
        return Err(StageError::Inactive { id: doc.id.clone() });
    }
    if stage == LlmStage::L5 && doc.doc_type != DocType::Paper {
        return Err(StageError::NotAPaper {
            id: doc.id.clone(),
            doc_type: doc.doc_type.as_str(),
        });
    }
    if doc.stage() != stage.prior() {
        return Err(StageError::WrongStage {
            id: doc.id.clone(),
            stage,
            need: stage.prior(),
            found: doc.stage(),
        });
    }
    Ok(())
}

/// Processes one document's chunks with bounded fan-out and reassembles the
/// results in chunk order. Failed chunks keep their original text.
pub fn run_stage(
    doc: &Document,
    stage: LlmStage,
    client: &dyn ChatModel,
    cfg: &StageConfig,
    tokenizer: &dyn Tokenizer,
) -> Result<StageOutcome, StageError> {
    check_preconditions(doc, stage)?;
    let chunks = chunk_text(&doc.id, doc.text(), stage.unit(), cfg.window.max(1), tokenizer);
    let results = process_chunks(&chunks, stage, client, cfg);
    Ok(assemble(doc, stage, &chunks, results, cfg.success_percent))
}

fn process_chunks(
    chunks: &[Chunk],
    stage: LlmStage,
    client: &dyn ChatModel,
    cfg: &StageConfig,
) -> Vec<Result<String, ChunkFailure>> {
    let params = cfg.params();
    let slots: Vec<Mutex<Option<Result<String, ChunkFailure>>>> = chunks.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = cfg.concurrency.clamp(1, chunks.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(chunk) = chunks.get(i) else { break };
                let r = match stage {
                    LlmStage::L4 => refine_chunk_l4(chunk, client, &params),
                    LlmStage::L5 => complete_chunk_l5(chunk, client, &params),
                };
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every chunk processed"))
        .collect()
}

fn assemble(
    doc: &Document,
    stage: LlmStage,
    chunks: &[Chunk],
    results: Vec<Result<String, ChunkFailure>>,
    percent: u32,
) -> StageOutcome {
    let mut output = String::with_capacity(doc.byte_len());
    let mut failures = BTreeMap::new();
    let mut cleaned = 0;
    for (chunk, r) in chunks.iter().zip(results) {
        match r {
            Ok(text) => {
                cleaned += 1;
                output.push_str(&text);
            }
            Err(f) => {
                *failures.entry(f).or_default() += 1;
                output.push_str(&chunk.text);
            }
        }
    }
    let total = chunks.len();
    StageOutcome {
        doc_id: doc.id.clone(),
        stage,
        total_chunks: total,
        cleaned_chunks: cleaned,
        failed_chunks: total - cleaned,
        failures,
        document_verdict: if meets_threshold(cleaned, total, percent) {
            Verdict::Success
        } else {
            Verdict::FailedRequeue
        },
        output_text: output,
    }
}

/// Chunk statuses implied by an outcome's per-chunk results.
pub fn chunk_status(result: &Result<String, ChunkFailure>) -> ChunkStatus {
    match result {
        Ok(_) => ChunkStatus::Cleaned,
        Err(_) => ChunkStatus::RetainedOriginal,
    }
}

/// Success replaces the text and advances the stage; otherwise the document
/// is marked failed for requeue and its text is left alone.
pub fn apply_outcome(doc: &mut Document, outcome: &StageOutcome) {
    match outcome.document_verdict {
        Verdict::Success => {
            doc.set_text(&outcome.output_text);
            doc.reach(outcome.stage.level());
        }
        Verdict::FailedRequeue => doc.fail_with(QC_FAILED),
    }
}
