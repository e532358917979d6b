//! Leveled curation of scientific text corpora.
//!
//! The crate is organised by processing level:
//!
//! * [`corpus`]: document model, ingestion, normalization, tokenizers, portraits (L0/L1).
//! * [`dedup`]: MinHash-LSH near-duplicate removal (L2).
//! * [`filters`]: size, garbled-text and language rules (L2); label-driven filters,
//!   discipline mapping and the book/paper split (L3).
//! * [`llm_stages`]: chunked generative refinement (L4) and cognitive completion (L5).
//! * [`decontam`]: exact n-gram benchmark decontamination.
//! * [`benchgen`]: seven-option MCQ benchmark construction.
//! * [`orchestrator`]: lease-based priority task queue with heartbeats and orphan reclamation.
//! * [`model_client`]: chat-model and classifier interfaces with scripted and HTTP backends.
//! * [`pipeline`]: configuration-driven composition of the stages.

pub mod benchgen;
pub mod corpus;
pub mod decontam;
pub mod dedup;
pub mod filters;
pub mod ledger;
pub mod llm_stages;
pub mod model_client;
pub mod orchestrator;
pub mod pipeline;
pub mod prompts;

pub use corpus::{DocType, Document, Level, Status};
