//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use stratum_core::model_client::DEFAULT_DIMENSIONS;

/// Pseudo-words from a seeded stream; distinct seeds give unrelated text.
pub fn random_words(seed: u64, n: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(3..10);
            (0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect()
        })
        .collect()
}

pub fn random_text(seed: u64, n: usize) -> String {
    random_words(seed, n).join(" ")
}

/// What the 50-document pipeline fixture must end with.
pub struct E2eExpect {
    pub input: usize,
    pub duplicates: usize,
    pub undersize: usize,
    pub garbled: usize,
    pub non_educational: usize,
    pub book_paper_failed: usize,
    pub contaminated: usize,
    pub papers: usize,
    pub qa_items: usize,
    pub eval_size: usize,
}

impl E2eExpect {
    pub fn active(&self) -> usize {
        self.input - self.dropped() - self.book_paper_failed
    }

    pub fn dropped(&self) -> usize {
        self.duplicates + self.undersize + self.garbled + self.non_educational + self.contaminated
    }
}

pub const E2E: E2eExpect = E2eExpect {
    input: 50,
    duplicates: 4,
    undersize: 3,
    garbled: 2,
    non_educational: 1,
    book_paper_failed: 1,
    contaminated: 2,
    papers: 15,
    // Anchors 40..=44 generate; 44 then fails the completeness judge.
    qa_items: 4,
    eval_size: 3,
};

const WORDS: usize = 1400;

fn anchor_sentence(k: usize) -> String {
    format!("anchorfact{k:02} states the measured value is {k} kelvin .")
}

fn contamination(k: usize) -> String {
    random_text(9000 + k as u64, 30)
}

fn fixture_docs() -> Vec<(String, String)> {
    let mut docs = Vec::new();
    for i in 0..50usize {
        let mut text = random_text(i as u64, WORDS);
        match i {
            0..=2 => text = random_text(i as u64, 200),
            3 | 4 => text = format!("{} {}", "\u{FFFD}".repeat(3000), random_text(i as u64, 20)),
            5..=8 => {
                // Near copy of doc i + 5, a few words shorter.
                let w = random_words(i as u64 + 5, WORDS);
                text = w[..WORDS - 3].join(" ");
            }
            9 => text = format!("adcopy {text}"),
            14 => text = format!("badtype {text}"),
            15 | 16 => text = format!("{text} {}", contamination(i - 15)),
            40..=46 => text = format!("{} {} {}", random_text(i as u64, 300), anchor_sentence(i), text),
            _ => {}
        }
        if (20..35).contains(&i) {
            text = format!("papermark {text}");
        }
        docs.push((format!("d{i:02}"), text));
    }
    docs
}

fn mcq(k: usize) -> serde_json::Value {
    json!({
        "question": format!("Which value was measured in fact {k}?"),
        "correct_option": format!("{k} kelvin"),
        "incorrect_option_1": format!("{} kelvin", k + 100),
        "incorrect_option_2": format!("{} kelvin", k + 200),
        "incorrect_option_3": format!("{} kelvin", k + 300),
        "incorrect_option_4": format!("{} kelvin", k + 400),
        "incorrect_option_5": format!("{} kelvin", k + 500),
        "incorrect_option_6": format!("{} kelvin", k + 600),
        "reference": anchor_sentence(k),
    })
}

fn write_json(path: &Path, v: &serde_json::Value) {
    std::fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

/// Writes the 50-document fixture, scripted backends and a full pipeline
/// config into `dir`; returns the config path.
pub fn write_e2e_fixture(dir: &Path) -> PathBuf {
    let docs: String = fixture_docs()
        .into_iter()
        .map(|(id, text)| json!({"id": id, "text": text}).to_string() + "\n")
        .collect();
    std::fs::write(dir.join("docs.jsonl"), docs).unwrap();

    let bench: String = (0..2)
        .map(|k| {
            let t = contamination(k);
            let (p, s) = t.split_at(t.find(' ').unwrap());
            json!({"id": format!("b{k}"), "problem": p, "solution": s.trim_start()}).to_string() + "\n"
        })
        .chain(["{\"problem\": \"What is 2+2?\", \"solution\": \"It is four, not five.\"}\n".to_string()])
        .collect();
    std::fs::write(dir.join("bench.jsonl"), bench).unwrap();

    let mut default: serde_json::Map<String, serde_json::Value> =
        DEFAULT_DIMENSIONS.iter().map(|d| (d.to_string(), json!("unknown"))).collect();
    default.insert("fdc_code".into(), json!("530"));
    default.insert("doc_type_v1".into(), json!("Academic Writing"));
    default.insert("doc_type_v2".into(), json!("Academic Writing"));
    write_json(
        &dir.join("labels.json"),
        &json!({
            "default": default,
            "rules": [
                {"contains": "adcopy", "labels": {"doc_type_v1": "Advertisement"}},
                {"contains": "anchorfact4", "labels": {"fdc_code": "610"}},
            ],
        }),
    );
    write_json(
        &dir.join("book_paper.json"),
        &json!({
            "rules": [
                {"contains": "badtype", "reply": "I cannot tell."},
                {"contains": "papermark", "reply": "{\"analysis\": \"sections and citations\", \"is_article\": true}"},
            ],
            "default": "{\"analysis\": \"chapters\", \"is_article\": false}",
        }),
    );
    let mut gen_rules: Vec<_> = (40..=44)
        .map(|k| json!({"contains": format!("anchorfact{k:02}"), "reply": format!("```json\n{}\n```", mcq(k))}))
        .collect();
    gen_rules.push(json!({"contains": "anchorfact45", "reply": "{\"question\": \"unterminated"}));
    let mut degenerate = mcq(46);
    degenerate["incorrect_option_1"] = json!("46 Kelvin");
    gen_rules.push(json!({"contains": "anchorfact46", "reply": degenerate.to_string()}));
    write_json(&dir.join("generator.json"), &json!({"rules": gen_rules, "default": "No QA"}));
    write_json(
        &dir.join("judge.json"),
        &json!({
            "rules": [{"contains": "fact 44", "reply": "{\"is_valid\": false, \"overall_assessment\": \"vague\"}"}],
            "default": "Checked.\n{\"is_valid\": true}",
        }),
    );

    let config = r#"input = "docs.jsonl"
output_dir = "out"

[models]
teacher = { kind = "identity" }
book_paper = { kind = "scripted", script = "book_paper.json" }
labeler = { kind = "scripted", script = "labels.json" }
generator = { kind = "scripted", script = "generator.json" }
judge = { kind = "scripted", script = "judge.json" }

[queue]
workers = 3

[[stages]]
kind = "dedup"

[[stages]]
kind = "rules"
language_detector = "off"

[[stages]]
kind = "classify"

[[stages]]
kind = "refine"

[[stages]]
kind = "complete"

[[stages]]
kind = "decontam"
benchmark = "bench.jsonl"

[[stages]]
kind = "benchgen"
eval_size = 3
sample_seed = 7
render_seed = 11

[[stages]]
kind = "portrait"
group_by = "discipline"
"#;
    let path = dir.join("pipeline.toml");
    std::fs::write(&path, config).unwrap();
    path
}

pub mod oracle {
    //! Straightforward reimplementations used to check the real code paths.

    use std::collections::{BTreeSet, HashMap, HashSet};

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::random_words;

    pub fn shingles(text: &str, n: usize) -> HashSet<String> {
        let w: Vec<&str> = text.split_whitespace().collect();
        if w.is_empty() {
            return HashSet::new();
        }
        if w.len() < n {
            return HashSet::from([w.join(" ")]);
        }
        w.windows(n).map(|s| s.join(" ")).collect()
    }

    pub fn jaccard(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
        let inter = a.intersection(b).count();
        let union = a.len() + b.len() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Ids surviving all-pairs dedup: components over pairs with Jaccard at
    /// least `threshold`, each keeping its longest text, then smallest id.
    pub fn dedup_survivors(docs: &[(String, String)], threshold: f64) -> BTreeSet<String> {
        let sets: Vec<_> = docs.iter().map(|(_, t)| shingles(t, 5)).collect();
        let n = docs.len();
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            for j in i + 1..n {
                if jaccard(&sets[i], &sets[j]) >= threshold {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        let mut seen = vec![false; n];
        let mut kept = BTreeSet::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut k = 0;
            while k < comp.len() {
                for &m in &adj[comp[k]] {
                    if !seen[m] {
                        seen[m] = true;
                        comp.push(m);
                    }
                }
                k += 1;
            }
            let best = comp
                .iter()
                .max_by(|&&a, &&b| {
                    docs[a].1.len().cmp(&docs[b].1.len()).then_with(|| docs[b].0.cmp(&docs[a].0))
                })
                .unwrap();
            kept.insert(docs[*best].0.clone());
        }
        kept
    }

    /// 80 unrelated documents plus near copies of 20 of them, each with one
    /// or two words replaced (Jaccard about 0.9 to 0.95).
    pub fn planted_dedup_corpus(seed: u64) -> Vec<(String, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut docs: Vec<(String, String)> = (0..80)
            .map(|i| (format!("u{i:02}"), random_words(seed * 1000 + i, 200 + i as usize).join(" ")))
            .collect();
        let sources = rand::seq::index::sample(&mut rng, 80, 20);
        for (k, src) in sources.into_iter().enumerate() {
            let mut w: Vec<String> = docs[src].1.split(' ').map(String::from).collect();
            for _ in 0..1 + k % 2 {
                let at = rng.gen_range(0..w.len());
                w[at] = format!("edit{k}x{at}");
            }
            docs.push((format!("p{k:02}"), w.join(" ")));
        }
        docs
    }

    /// Whitespace tokens of `problem + "\n" + solution`.
    pub fn sample_tokens(problem: &str, solution: &str) -> Vec<String> {
        format!("{problem}\n{solution}").split_whitespace().map(String::from).collect()
    }

    /// True iff `doc` contains some `n`-token run of a sample, or a whole
    /// sample shorter than `n`, compared token by token.
    pub fn contaminated(doc: &str, samples: &[Vec<String>], n: usize) -> bool {
        let d: Vec<&str> = doc.split_whitespace().collect();
        samples.iter().any(|s| {
            let m = n.min(s.len());
            if m == 0 || d.len() < m {
                return false;
            }
            let grams: HashSet<&[String]> = s.windows(m).collect();
            d.windows(m).any(|w| grams.iter().any(|g| g.iter().zip(w).all(|(a, b)| a == b)))
        })
    }

    /// Decontamination fixture: 50 samples and 200 documents drawn from a
    /// 300-word vocabulary. Documents planted with a full 20-token run are
    /// listed in the returned map; 19-token plants are near misses.
    pub struct DecontamFixture {
        pub samples: Vec<(String, String)>,
        pub docs: Vec<(String, String)>,
        pub planted: HashMap<String, usize>,
        pub near_miss: HashSet<String>,
    }

    pub fn decontam_fixture(seed: u64) -> DecontamFixture {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vocab = random_words(seed + 77, 300);
        let draw = |rng: &mut ChaCha8Rng, n: usize| -> Vec<String> {
            (0..n).map(|_| vocab[rng.gen_range(0..vocab.len())].clone()).collect()
        };
        let samples: Vec<(String, String)> = (0..50)
            .map(|k| {
                let len = if k % 10 == 0 { 12 } else { 40 + k };
                let t = draw(&mut rng, len);
                let cut = rng.gen_range(1..len);
                (t[..cut].join(" "), t[cut..].join(" "))
            })
            .collect();
        let toks: Vec<Vec<String>> = samples.iter().map(|(p, s)| sample_tokens(p, s)).collect();
        let mut docs = Vec::new();
        let mut planted = HashMap::new();
        let mut near_miss = HashSet::new();
        for i in 0..200 {
            let id = format!("c{i:03}");
            let mut body = draw(&mut rng, 300);
            let k = rng.gen_range(0..50);
            let run = match i % 5 {
                0 => Some(20.min(toks[k].len())),
                1 if toks[k].len() >= 20 => Some(19),
                _ => None,
            };
            if let Some(len) = run {
                let from = rng.gen_range(0..=toks[k].len() - len);
                let at = rng.gen_range(0..body.len());
                body.splice(at..at, toks[k][from..from + len].iter().cloned());
                if len == 19 {
                    near_miss.insert(id.clone());
                } else {
                    planted.insert(id.clone(), k);
                }
            }
            docs.push((id, body.join(" ")));
        }
        DecontamFixture {
            samples,
            docs,
            planted,
            near_miss,
        }
    }
}
