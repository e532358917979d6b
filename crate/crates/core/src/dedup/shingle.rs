use std::collections::HashSet;

use xxhash_rust::xxh3::xxh3_64;

pub const DEFAULT_SHINGLE_SIZE: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShingleSet {
    pub doc_id: String,
    pub shingles: HashSet<u64>,
}

impl ShingleSet {
    pub fn len(&self) -> usize {
        self.shingles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shingles.is_empty()
    }

    /// Exact Jaccard similarity. Two empty sets score 0 so that empty
    /// documents never cluster with each other.
    pub fn jaccard(&self, other: &ShingleSet) -> f64 {
        let (small, large) = if self.len() <= other.len() {
            (&self.shingles, &other.shingles)
        } else {
            (&other.shingles, &self.shingles)
        };
        let inter = small.iter().filter(|h| large.contains(h)).count();
        let union = self.len() + other.len() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }
}

fn hash_words(words: &[&str]) -> u64 {
    xxh3_64(words.join(" ").as_bytes())
}

/// Hashes every run of `n` consecutive whitespace tokens.
///
/// Texts with fewer than `n` tokens produce a single shingle over all of them.
///
/// # Panics
///
/// If `n` is zero.
pub fn shingle(doc_id: &str, text: &str, n: usize) -> ShingleSet {
    assert!(n >= 1, "shingle size must be at least 1");
    let words: Vec<&str> = text.split_whitespace().collect();
    let shingles = if words.is_empty() {
        HashSet::new()
    } else if words.len() < n {
        HashSet::from([hash_words(&words)])
    } else {
        words.windows(n).map(hash_words).collect()
    };
    ShingleSet {
        doc_id: doc_id.to_string(),
        shingles,
    }
}
