use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::document::Document;
use super::tokenize::Tokenizer;

pub const UNLABELED: &str = "unlabeled";

/// Document field used to partition a portrait.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    DocType,
    Discipline,
    Source,
    Label(String),
}

impl GroupBy {
    fn key(&self, doc: &Document) -> String {
        let value = match self {
            GroupBy::DocType => Some(doc.doc_type.as_str().to_string()),
            GroupBy::Discipline => doc.discipline.map(|d| d.display_name().to_string()),
            GroupBy::Source => doc.source.clone(),
            GroupBy::Label(name) => doc.labels.get(name).cloned(),
        };
        value.unwrap_or_else(|| UNLABELED.to_string())
    }

    pub fn name(&self) -> String {
        match self {
            GroupBy::DocType => "doc_type".into(),
            GroupBy::Discipline => "discipline".into(),
            GroupBy::Source => "source".into(),
            GroupBy::Label(name) => format!("labels.{name}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitRow {
    pub category: String,
    pub sample_count: u64,
    pub token_count: u64,
    pub avg_tokens_per_sample: f64,
    /// Share of tokens, in percent.
    pub percentage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitReport {
    pub group_by: String,
    pub rows: Vec<PortraitRow>,
    pub total: PortraitRow,
}

impl PortraitReport {
    pub fn row(&self, category: &str) -> Option<&PortraitRow> {
        self.rows.iter().find(|r| r.category == category)
    }

    /// Fixed-width table with percentages at two decimals.
    pub fn to_table(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.category.len())
            .max()
            .unwrap_or(0)
            .max(self.group_by.len())
            .max(5);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>10}  {:>14}  {:>16}  {:>8}",
            self.group_by, "Samples", "Tokens", "Avg. Toks/Sample", "Pct"
        );
        for row in self.rows.iter().chain(std::iter::once(&self.total)) {
            let _ = writeln!(
                out,
                "{:<width$}  {:>10}  {:>14}  {:>16.0}  {:>7.2}%",
                row.category,
                row.sample_count,
                row.token_count,
                row.avg_tokens_per_sample,
                row.percentage
            );
        }
        out
    }
}

fn make_row(category: String, samples: u64, tokens: u64, total_tokens: u64) -> PortraitRow {
    PortraitRow {
        category,
        sample_count: samples,
        token_count: tokens,
        avg_tokens_per_sample: if samples == 0 {
            0.0
        } else {
            tokens as f64 / samples as f64
        },
        percentage: if total_tokens == 0 {
            0.0
        } else {
            tokens as f64 * 100.0 / total_tokens as f64
        },
    }
}

/// Per-category sample and token statistics over the active documents.
///
/// Uses the document's recorded `token_count` when present and counts with
/// `tokenizer` otherwise.
pub fn portrait<'a, I>(docs: I, group_by: &GroupBy, tokenizer: &dyn Tokenizer) -> PortraitReport
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut groups: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for doc in docs.into_iter().filter(|d| d.is_active()) {
        let tokens = doc
            .token_count
            .unwrap_or_else(|| tokenizer.count(doc.text()) as u64);
        let entry = groups.entry(group_by.key(doc)).or_default();
        entry.0 += 1;
        entry.1 += tokens;
    }
    let total_samples: u64 = groups.values().map(|g| g.0).sum();
    let total_tokens: u64 = groups.values().map(|g| g.1).sum();
    let rows = groups
        .into_iter()
        .map(|(cat, (s, t))| make_row(cat, s, t, total_tokens))
        .collect();
    PortraitReport {
        group_by: group_by.name(),
        rows,
        total: make_row("Total".into(), total_samples, total_tokens, total_tokens),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::document::Discipline;
    use crate::corpus::tokenize::WhitespaceTokenizer;
    use proptest::prelude::*;

    fn doc_with(id: &str, discipline: Option<Discipline>, tokens: u64) -> Document {
        let mut d = Document::new(id, "x");
        d.discipline = discipline;
        d.token_count = Some(tokens);
        d
    }

    #[test]
    fn book_table_medicine_share() {
        // Token counts in units of 10M tokens, mirroring the book-domain table.
        let table = [
            (Discipline::ComputerScience, 1052),
            (Discipline::Engineering, 2219),
            (Discipline::HumanSocial, 14843),
            (Discipline::Medicine, 2779),
            (Discipline::Biology, 844),
            (Discipline::Chemistry, 714),
            (Discipline::Mathematics, 1118),
            (Discipline::Physics, 469),
            (Discipline::StemOthers, 1112),
        ];
        let docs: Vec<_> = table
            .iter()
            .enumerate()
            .map(|(i, &(d, t))| doc_with(&i.to_string(), Some(d), t * 10_000_000))
            .collect();
        let report = portrait(&docs, &GroupBy::Discipline, &WhitespaceTokenizer);
        // The published rows sum to 251.50B (the table prints 251.49B); 11.05% holds for both.
        assert_eq!(report.total.token_count, 251_500_000_000);
        let med = report.row("Medicine").unwrap();
        assert_eq!(format!("{:.2}", med.percentage), "11.05");
    }

    #[test]
    fn paper_table_medicine_share_follows_its_own_rows() {
        // The published rows sum to 654.95B; Medicine's share of that is 38.94%.
        let medicine = doc_with("m", Some(Discipline::Medicine), 25_505);
        let rest = doc_with("r", Some(Discipline::Physics), 65_495 - 25_505);
        let report = portrait([&medicine, &rest], &GroupBy::Discipline, &WhitespaceTokenizer);
        assert_eq!(format!("{:.2}", report.row("Medicine").unwrap().percentage), "38.94");
    }

    #[test]
    fn single_category_is_everything() {
        let docs = vec![
            doc_with("a", Some(Discipline::Physics), 10),
            doc_with("b", Some(Discipline::Physics), 30),
        ];
        let report = portrait(&docs, &GroupBy::Discipline, &WhitespaceTokenizer);
        assert_eq!(report.rows.len(), 1);
        assert_eq!(format!("{:.2}", report.rows[0].percentage), "100.00");
        assert_eq!(report.rows[0].avg_tokens_per_sample, 20.0);
    }

    #[test]
    fn unset_field_goes_to_unlabeled_and_dropped_docs_are_excluded() {
        let mut gone = doc_with("c", Some(Discipline::Biology), 99);
        gone.drop_with("duplicate");
        let docs = vec![doc_with("a", None, 5), doc_with("b", Some(Discipline::Biology), 5), gone];
        let report = portrait(&docs, &GroupBy::Discipline, &WhitespaceTokenizer);
        assert_eq!(report.row(UNLABELED).unwrap().sample_count, 1);
        assert_eq!(report.total.sample_count, 2);
        assert!(report.to_table().contains("50.00%"));
    }

    #[test]
    fn falls_back_to_tokenizer() {
        let docs = vec![Document::new("a", "one two three")];
        let report = portrait(&docs, &GroupBy::DocType, &WhitespaceTokenizer);
        assert_eq!(report.row("unknown").unwrap().token_count, 3);
    }

    proptest! {
        #[test]
        fn percentages_sum_to_hundred(counts in proptest::collection::vec((0usize..9, 1u64..1_000_000), 1..60)) {
            let docs: Vec<_> = counts
                .iter()
                .enumerate()
                .map(|(i, &(d, t))| doc_with(&i.to_string(), Some(Discipline::ALL[d]), t))
                .collect();
            let report = portrait(&docs, &GroupBy::Discipline, &WhitespaceTokenizer);
            let sum: f64 = report.rows.iter().map(|r| r.percentage).sum();
            prop_assert!((sum - 100.0).abs() <= 0.05);
            // Two-decimal display still sums within tolerance.
            let rounded: f64 = report.rows.iter().map(|r| (r.percentage * 100.0).round() / 100.0).sum();
            prop_assert!((rounded - 100.0).abs() <= 0.05);
            for r in &report.rows {
                let back = r.avg_tokens_per_sample * r.sample_count as f64;
                prop_assert!((back - r.token_count as f64).abs() < 1e-6 * r.token_count as f64 + 1e-9);
            }
        }
    }
}
