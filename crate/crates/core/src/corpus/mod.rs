//! Document model, ingestion, normalization, tokenization and corpus portraits.

mod document;
mod ingest;
mod normalize;
mod portrait;
mod report;
mod tokenize;

use std::io::{self, Write};

pub use document::{DocType, Discipline, Document, Level, Status};
pub use ingest::{IngestReport, Ingestor};
pub use normalize::{normalize, normalize_bytes};
pub use portrait::{portrait, GroupBy, PortraitReport, PortraitRow, UNLABELED};
pub use report::{StageOutput, StageReport};
pub use tokenize::{
    count_tokens, Tokenizer, TokenizerKind, TokenizerRegistry, TokenizerSpec, WhitespaceTokenizer,
};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("tokenizer {0:?} is not registered")]
    UnknownTokenizer(String),
    #[error("document {id}: stage cannot move from {from} back to {to}")]
    StageRegression { id: String, from: Level, to: Level },
}

/// Writes documents as one JSON object per line.
pub fn write_documents<'a, W, I>(mut out: W, docs: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a Document>,
{
    for doc in docs {
        serde_json::to_writer(&mut out, doc)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
