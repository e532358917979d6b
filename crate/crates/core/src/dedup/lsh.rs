use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::minhash::{MinHashSignature, NUM_BANDS, ROWS_PER_BAND};
use super::DedupError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LshLayout {
    pub bands: usize,
    pub rows: usize,
}

impl LshLayout {
    pub fn signature_len(&self) -> usize {
        self.bands * self.rows
    }

    /// Probability that a pair with Jaccard `s` shares at least one full band.
    pub fn candidate_probability(&self, s: f64) -> f64 {
        1.0 - (1.0 - s.powi(self.rows as i32)).powi(self.bands as i32)
    }
}

impl Default for LshLayout {
    fn default() -> Self {
        LshLayout {
            bands: NUM_BANDS,
            rows: ROWS_PER_BAND,
        }
    }
}

/// Index pairs `(i, j)`, `i < j`, whose signatures agree on every row of at
/// least one band. Sentinel (empty-document) signatures never pair.
pub fn lsh_candidates(
    signatures: &[MinHashSignature],
    layout: LshLayout,
) -> Result<BTreeSet<(usize, usize)>, DedupError> {
    let expected = layout.signature_len();
    if let Some(bad) = signatures.iter().find(|s| s.values.len() != expected) {
        return Err(DedupError::LayoutMismatch {
            doc_id: bad.doc_id.clone(),
            expected,
            found: bad.values.len(),
        });
    }
    let live: Vec<usize> = (0..signatures.len())
        .filter(|&i| !signatures[i].is_sentinel())
        .collect();

    let per_band: Vec<Vec<(usize, usize)>> = (0..layout.bands)
        .into_par_iter()
        .map(|band| {
            let rows = band * layout.rows..(band + 1) * layout.rows;
            let mut buckets: HashMap<&[u64], Vec<usize>> = HashMap::new();
            for &i in &live {
                buckets
                    .entry(&signatures[i].values[rows.clone()])
                    .or_default()
                    .push(i);
            }
            let mut pairs = Vec::new();
            for members in buckets.values().filter(|m| m.len() > 1) {
                for (k, &a) in members.iter().enumerate() {
                    for &b in &members[k + 1..] {
                        pairs.push((a.min(b), a.max(b)));
                    }
                }
            }
            pairs
        })
        .collect();
    Ok(per_band.into_iter().flatten().collect())
}
