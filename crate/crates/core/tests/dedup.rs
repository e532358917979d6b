mod common;

use std::collections::BTreeSet;

use common::oracle::{dedup_survivors, planted_dedup_corpus};
use proptest::prelude::*;
use stratum_core::dedup::{dedup, DedupConfig};
use stratum_core::Document;

fn survivors(docs: &[(String, String)]) -> BTreeSet<String> {
    let docs: Vec<Document> = docs.iter().map(|(id, t)| Document::new(id.clone(), t)).collect();
    let (out, report) = dedup(docs, &DedupConfig::default()).unwrap();
    assert!(out.report.is_balanced());
    assert_eq!(report.removed, out.report.dropped);
    out.active().map(|d| d.id.clone()).collect()
}

#[test]
fn planted_corpora_match_all_pairs() {
    for seed in 1..=5 {
        let docs = planted_dedup_corpus(seed);
        let got = survivors(&docs);
        assert_eq!(got, dedup_survivors(&docs, 0.8), "seed {seed}");
        assert_eq!(docs.len() - got.len(), 20, "seed {seed}");
    }
}

#[test]
fn clusters_of_three_keep_one() {
    let base = common::random_text(5, 300);
    let mut w: Vec<&str> = base.split(' ').collect();
    let a = w.join(" ");
    w[100] = "changed";
    let b = w.join(" ");
    w[200] = "again";
    let c = format!("{} tail", w.join(" "));
    let docs = vec![("a".to_string(), a), ("b".to_string(), b), ("c".to_string(), c)];
    assert_eq!(survivors(&docs), BTreeSet::from(["c".to_string()]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn input_order_does_not_matter(seed in 0u64..1000, perm_seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let docs = planted_dedup_corpus(seed);
        let mut shuffled = docs.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed));
        prop_assert_eq!(survivors(&docs), survivors(&shuffled));
    }
}
