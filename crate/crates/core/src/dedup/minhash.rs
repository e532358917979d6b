use super::shingle::ShingleSet;

/// 14 bands of 8 rows.
pub const NUM_BANDS: usize = 14;
pub const ROWS_PER_BAND: usize = 8;
pub const NUM_HASHES: usize = NUM_BANDS * ROWS_PER_BAND;

/// Value used for every position of an empty set's signature.
pub const SENTINEL: u64 = u64::MAX;

/// Base seed the default hash family is expanded from.
pub const DEFAULT_BASE_SEED: u64 = 0x5DEE_CE66_D1CE_4E5B;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Murmur3 64-bit finalizer; a bijection on u64.
#[inline]
fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    k ^= k >> 33;
    k = k.wrapping_mul(0xC4CE_B9FE_1A85_EC53);
    k ^ (k >> 33)
}

/// The hash family: `h_i(x) = fmix64(a_i * x + b_i)` with odd `a_i`, all mod 2^64.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinHashSeeds {
    params: Vec<(u64, u64)>,
}

impl MinHashSeeds {
    pub fn from_base(base: u64, count: usize) -> Self {
        let mut state = base;
        let params = (0..count)
            .map(|_| (splitmix64(&mut state) | 1, splitmix64(&mut state)))
            .collect();
        MinHashSeeds { params }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    #[inline]
    fn hash(&self, i: usize, x: u64) -> u64 {
        let (a, b) = self.params[i];
        fmix64(a.wrapping_mul(x).wrapping_add(b))
    }
}

impl Default for MinHashSeeds {
    fn default() -> Self {
        Self::from_base(DEFAULT_BASE_SEED, NUM_HASHES)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinHashSignature {
    pub doc_id: String,
    pub values: Vec<u64>,
}

impl MinHashSignature {
    /// True for the signature of an empty shingle set.
    pub fn is_sentinel(&self) -> bool {
        self.values.iter().all(|&v| v == SENTINEL)
    }

    pub fn matching_positions(&self, other: &MinHashSignature) -> usize {
        self.values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| a == b)
            .count()
    }

    /// Fraction of agreeing positions; an unbiased Jaccard estimate.
    pub fn estimate_jaccard(&self, other: &MinHashSignature) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.matching_positions(other) as f64 / self.values.len() as f64
    }
}

/// Position `i` holds the minimum of `h_i` over the shingles.
pub fn minhash_signature(set: &ShingleSet, seeds: &MinHashSeeds) -> MinHashSignature {
    let mut values = vec![SENTINEL; seeds.len()];
    for &sh in &set.shingles {
        for (i, slot) in values.iter_mut().enumerate() {
            let h = seeds.hash(i, sh);
            if h < *slot {
                *slot = h;
            }
        }
    }
    MinHashSignature {
        doc_id: set.doc_id.clone(),
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dedup::shingle::shingle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn set_of(id: &str, items: impl IntoIterator<Item = u64>) -> ShingleSet {
        ShingleSet {
            doc_id: id.into(),
            shingles: items.into_iter().collect(),
        }
    }

    /// Two random sets with exactly `shared` common and `only_each` private items each.
    fn pair_with_overlap(rng: &mut ChaCha8Rng, shared: usize, only_each: usize) -> (ShingleSet, ShingleSet) {
        let mut seen = HashSet::new();
        let mut fresh = |n: usize| -> Vec<u64> {
            let mut v = Vec::with_capacity(n);
            while v.len() < n {
                let x: u64 = rng.gen();
                if seen.insert(x) {
                    v.push(x);
                }
            }
            v
        };
        let common = fresh(shared);
        let a_only = fresh(only_each);
        let b_only = fresh(only_each);
        (
            set_of("a", common.iter().chain(&a_only).copied()),
            set_of("b", common.iter().chain(&b_only).copied()),
        )
    }

    fn binomial_interval_probability(n: u64, p: f64, lo: u64, hi: u64) -> f64 {
        // Sum of pmf via logs; independent of the implementation under test.
        let ln_fact = |k: u64| (1..=k).map(|i| (i as f64).ln()).sum::<f64>();
        (lo..=hi)
            .map(|k| {
                (ln_fact(n) - ln_fact(k) - ln_fact(n - k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln())
                    .exp()
            })
            .sum()
    }

    #[test]
    fn default_layout_is_112() {
        assert_eq!(NUM_HASHES, 112);
        assert_eq!(MinHashSeeds::default().len(), 112);
    }

    #[test]
    fn identical_sets_identical_signatures() {
        let seeds = MinHashSeeds::default();
        let a = shingle("a", "the quick brown fox jumps over the lazy dog", 3);
        let mut b = shingle("b", "the quick brown fox jumps over the lazy dog", 3);
        b.doc_id = "a".into();
        assert_eq!(minhash_signature(&a, &seeds), minhash_signature(&b, &seeds));
    }

    #[test]
    fn empty_set_gives_sentinel_signature() {
        let sig = minhash_signature(&set_of("e", []), &MinHashSeeds::default());
        assert_eq!(sig.values.len(), 112);
        assert!(sig.is_sentinel());
    }

    #[test]
    fn half_overlap_match_count_interval() {
        let p = binomial_interval_probability(112, 0.5, 42, 70);
        assert!(p > 0.99, "binomial mass {p}");
        let seeds = MinHashSeeds::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut inside = 0;
        for _ in 0..1000 {
            // 100 shared of 200 total -> J = 0.5
            let (a, b) = pair_with_overlap(&mut rng, 100, 50);
            let m = minhash_signature(&a, &seeds).matching_positions(&minhash_signature(&b, &seeds));
            if (42..=70).contains(&m) {
                inside += 1;
            }
        }
        // Expected ~994; allow sampling noise of a few standard deviations.
        assert!(inside >= 980, "only {inside}/1000 in [42, 70]");
    }

    #[test]
    fn estimator_mean_absolute_error() {
        let seeds = MinHashSeeds::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut total_err = 0.0;
        for _ in 0..1000 {
            let shared = rng.gen_range(0..=120);
            let only = rng.gen_range(1..=60);
            let (a, b) = pair_with_overlap(&mut rng, shared, only);
            let exact = a.jaccard(&b);
            let est = minhash_signature(&a, &seeds).estimate_jaccard(&minhash_signature(&b, &seeds));
            total_err += (exact - est).abs();
        }
        let mae = total_err / 1000.0;
        assert!(mae < 0.06, "MAE {mae}");
    }
}
