//! L4 generative refinement and L5 cognitive completion.
//!
//! Documents are cut into windows ([`chunk_text`]), each window goes to the
//! teacher model, and the replies are checked and stitched back together in
//! order. A document passes when at least 95% of its chunks came back clean.

mod chunk;
mod refine;
mod repetition;
mod stage;

pub use chunk::{chunk_text, Chunk, ChunkStatus, ChunkUnit};
pub use refine::{
    complete_chunk_l5, extract_cleaned, reframe, refine_chunk_l4, CallParams, ChunkFailure, CLOSE_TAG,
    OPEN_TAG,
};
pub use repetition::{detect_repetition, DEFAULT_MAX_RUN, MAX_PERIOD};
pub use stage::{
    apply_outcome, check_preconditions, chunk_status, meets_threshold, run_stage, LlmStage, StageConfig,
    StageError, StageOutcome, Verdict, QC_FAILED,
};

use crate::corpus::{Document, Tokenizer};

/// Chunks a document in the given unit.
pub fn chunk_document(doc: &Document, unit: ChunkUnit, window: usize, tokenizer: &dyn Tokenizer) -> Vec<Chunk> {
    chunk_text(&doc.id, doc.text(), unit, window, tokenizer)
}
