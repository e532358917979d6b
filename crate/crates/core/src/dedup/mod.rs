//! MinHash-LSH near-duplicate removal.
//!
//! Documents are shingled into word 5-grams, sketched with 112 MinHash values
//! and banded 14 × 8. Band collisions are only candidates: a pair is merged
//! when its exact shingle Jaccard reaches the verification threshold, and
//! merged pairs are closed transitively with union-find. Each cluster keeps
//! its longest document (ties broken by the smallest id).

mod cache;
mod lsh;
mod minhash;
mod shingle;
mod union_find;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, StageOutput, StageReport};

pub use cache::{read_signatures, write_signatures};
pub use lsh::{lsh_candidates, LshLayout};
pub use minhash::{
    minhash_signature, MinHashSeeds, MinHashSignature, DEFAULT_BASE_SEED, NUM_BANDS, NUM_HASHES,
    ROWS_PER_BAND, SENTINEL,
};
pub use shingle::{shingle, ShingleSet, DEFAULT_SHINGLE_SIZE};
pub use union_find::UnionFind;

pub const DROP_REASON: &str = "duplicate";

#[derive(Debug, thiserror::Error)]
pub enum DedupError {
    #[error("signature for {doc_id} has {found} values, layout needs {expected}")]
    LayoutMismatch {
        doc_id: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid dedup configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DedupConfig {
    pub shingle_size: usize,
    pub verify_threshold: f64,
    pub bands: usize,
    pub rows: usize,
    pub seed: u64,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig {
            shingle_size: DEFAULT_SHINGLE_SIZE,
            verify_threshold: 0.8,
            bands: NUM_BANDS,
            rows: ROWS_PER_BAND,
            seed: DEFAULT_BASE_SEED,
        }
    }
}

impl DedupConfig {
    pub fn validate(&self) -> Result<(), DedupError> {
        if self.shingle_size == 0 {
            return Err(DedupError::Config("shingle_size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.verify_threshold) {
            return Err(DedupError::Config("verify_threshold must be in [0, 1]".into()));
        }
        if self.bands == 0 || self.rows == 0 {
            return Err(DedupError::Config("bands and rows must be >= 1".into()));
        }
        Ok(())
    }

    pub fn layout(&self) -> LshLayout {
        LshLayout {
            bands: self.bands,
            rows: self.rows,
        }
    }

    pub fn seeds(&self) -> MinHashSeeds {
        MinHashSeeds::from_base(self.seed, self.bands * self.rows)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateCluster {
    pub members: Vec<String>,
    pub kept: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupReport {
    pub input: usize,
    pub removed: usize,
    pub removal_rate: f64,
    pub candidate_pairs: usize,
    pub verified_pairs: usize,
    pub clusters: Vec<DuplicateCluster>,
}

/// Keep policy: longest text wins, then the smallest id.
fn keeper<'a>(docs: &'a [Document], members: &[usize]) -> &'a Document {
    members
        .iter()
        .map(|&i| &docs[i])
        .min_by(|a, b| b.byte_len().cmp(&a.byte_len()).then_with(|| a.id.cmp(&b.id)))
        .expect("cluster is non-empty")
}

/// Removes near duplicates among the active documents.
///
/// Inactive documents pass through untouched and are not counted as input.
pub fn dedup(
    mut docs: Vec<Document>,
    cfg: &DedupConfig,
) -> Result<(StageOutput, DedupReport), DedupError> {
    cfg.validate()?;
    let active: Vec<usize> = (0..docs.len()).filter(|&i| docs[i].is_active()).collect();
    let seeds = cfg.seeds();
    let shingles: Vec<ShingleSet> = active
        .par_iter()
        .map(|&i| shingle(&docs[i].id, docs[i].text(), cfg.shingle_size))
        .collect();
    let sigs: Vec<MinHashSignature> = shingles
        .par_iter()
        .map(|s| minhash_signature(s, &seeds))
        .collect();
    let candidates = lsh_candidates(&sigs, cfg.layout())?;

    let verified: Vec<(usize, usize)> = candidates
        .par_iter()
        .copied()
        .filter(|&(a, b)| shingles[a].jaccard(&shingles[b]) >= cfg.verify_threshold)
        .collect();

    let mut uf = UnionFind::new(active.len());
    for &(a, b) in &verified {
        uf.union(a, b);
    }

    let mut clusters = Vec::new();
    for group in uf.groups(2) {
        let members: Vec<usize> = group.iter().map(|&k| active[k]).collect();
        let kept_id = keeper(&docs, &members).id.clone();
        let mut ids: Vec<String> = members.iter().map(|&i| docs[i].id.clone()).collect();
        ids.sort();
        for &i in &members {
            if docs[i].id != kept_id {
                docs[i].drop_with(DROP_REASON);
            }
        }
        clusters.push(DuplicateCluster {
            members: ids,
            kept: kept_id,
        });
    }
    clusters.sort_by(|a, b| a.members.cmp(&b.members));

    let mut report = StageReport::new("dedup");
    for &i in &active {
        report.record(&docs[i]);
    }
    let dedup_report = DedupReport {
        input: report.input,
        removed: report.dropped,
        removal_rate: report.removal_rate(),
        candidate_pairs: candidates.len(),
        verified_pairs: verified.len(),
        clusters,
    };
    Ok((
        StageOutput {
            documents: docs,
            report,
        },
        dedup_report,
    ))
}
