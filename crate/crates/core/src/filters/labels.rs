use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fdc::{DisciplineMap, FdcMatch, UNMAPPED};
use super::Verdict;
use crate::corpus::{Document, Level, StageOutput, StageReport};
use crate::model_client::{ClassifyError, LabelClassifier};

pub const NON_EDUCATIONAL: &str = "non_educational";
pub const TYPE_DIMENSIONS: [&str; 2] = ["doc_type_v1", "doc_type_v2"];

pub fn default_blocklist() -> BTreeSet<String> {
    BTreeSet::from(["Advertisement".to_string()])
}

/// Short failure tag for stage reports.
pub fn fail_reason(e: &ClassifyError) -> &'static str {
    match e {
        ClassifyError::Schema(_) => "labels_schema",
        ClassifyError::Timeout => "labels_timeout",
        ClassifyError::Transport(_) => "labels_transport",
    }
}

/// Attaches the classifier's labels. On error the document is marked failed
/// for this stage and left for requeue.
pub fn apply_labels(doc: &mut Document, classifier: &dyn LabelClassifier) -> Result<(), ClassifyError> {
    let result = classifier.classify(doc.text());
    attach(doc, result)
}

fn attach(
    doc: &mut Document,
    result: Result<crate::model_client::LabelSet, ClassifyError>,
) -> Result<(), ClassifyError> {
    match result {
        Ok(labels) => {
            doc.labels = labels.dimensions;
            Ok(())
        }
        Err(e) => {
            doc.fail_with(fail_reason(&e));
            Err(e)
        }
    }
}

/// Drops iff either content-type label is blocklisted.
pub fn educational_filter(labels: &BTreeMap<String, String>, blocklist: &BTreeSet<String>) -> Verdict {
    let hit = TYPE_DIMENSIONS
        .iter()
        .filter_map(|d| labels.get(*d))
        .any(|v| blocklist.contains(v));
    if hit {
        Verdict::Drop(NON_EDUCATIONAL)
    } else {
        Verdict::Keep
    }
}

/// Sets the discipline from the `fdc_code` label unless metadata already set one.
/// Returns the table category, or [`UNMAPPED`].
pub fn assign_discipline(doc: &mut Document, map: &DisciplineMap) -> String {
    let m = match doc.labels.get("fdc_code").and_then(|c| parse_code(c)) {
        Some(code) => map.lookup(code),
        None => FdcMatch::Unmapped,
    };
    if doc.discipline.is_none() {
        doc.discipline = m.discipline();
    }
    m.category().to_string()
}

fn parse_code(raw: &str) -> Option<u16> {
    raw.trim().split('.').next()?.parse().ok()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelConfig {
    pub blocklist: BTreeSet<String>,
    /// Texts sent to the classifier per batch call.
    pub batch_size: usize,
}

impl Default for LabelConfig {
    fn default() -> Self {
        LabelConfig {
            blocklist: default_blocklist(),
            batch_size: 32,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelReport {
    pub unmapped: usize,
    pub categories: BTreeMap<String, usize>,
    /// Documents that failed labelling and should be queued again.
    pub requeue: Vec<String>,
}

/// Labels active documents, applies the educational filter and assigns
/// disciplines. Labelled survivors reach L3 only after the book/paper split,
/// so their stage is left unchanged here.
pub fn label_stage(
    mut docs: Vec<Document>,
    classifier: &dyn LabelClassifier,
    cfg: &LabelConfig,
    map: &DisciplineMap,
) -> (StageOutput, LabelReport) {
    let active: Vec<usize> = (0..docs.len()).filter(|&i| docs[i].is_active()).collect();
    let batch = cfg.batch_size.max(1);
    let results: Vec<Result<_, ClassifyError>> = active
        .par_chunks(batch)
        .flat_map_iter(|idx| {
            let texts: Vec<&str> = idx.iter().map(|&i| docs[i].text()).collect();
            classifier.classify_batch(&texts)
        })
        .collect();

    let mut report = StageReport::new("labels");
    let mut extra = LabelReport::default();
    for (&i, result) in active.iter().zip(results) {
        let doc = &mut docs[i];
        if attach(doc, result).is_ok() {
            if let Verdict::Drop(r) = educational_filter(&doc.labels, &cfg.blocklist) {
                doc.drop_with(r);
            } else {
                let cat = assign_discipline(doc, map);
                if cat == UNMAPPED {
                    extra.unmapped += 1;
                }
                *extra.categories.entry(cat).or_default() += 1;
            }
        } else {
            extra.requeue.push(doc.id.clone());
        }
        report.record(doc);
    }
    (StageOutput { documents: docs, report }, extra)
}

/// Marks a fully classified document as having completed L3.
pub fn complete_l3(doc: &mut Document) {
    if doc.is_active() {
        doc.reach(Level::L3);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_client::ScriptedClassifier;

    #[test]
    fn twelve_dimensions_attached() {
        let mut d = Document::new("a", "text");
        apply_labels(&mut d, &ScriptedClassifier::uniform("530")).unwrap();
        assert_eq!(d.labels.len(), 12);
        assert!(d.is_active());
    }

    #[test]
    fn missing_dimension_fails_document() {
        let c = ScriptedClassifier::uniform("530").without_dimension("x", "education_level");
        let mut d = Document::new("a", "x");
        assert!(apply_labels(&mut d, &c).is_err());
        assert!(!d.is_active());
        assert!(d.labels.is_empty());
    }

    #[test]
    fn batch_with_one_timeout() {
        let c = ScriptedClassifier::uniform("530").with_timeout("slow");
        let docs = vec![
            Document::new("a", "one"),
            Document::new("b", "slow two"),
            Document::new("c", "three"),
            Document::new("d", "four"),
        ];
        let (out, rep) = label_stage(docs, &c, &LabelConfig::default(), &DisciplineMap::packaged());
        assert_eq!(out.report.kept, 3);
        assert_eq!(out.report.failed, 1);
        assert_eq!(out.report.fail_reasons["labels_timeout"], 1);
        assert_eq!(rep.requeue, vec!["b"]);
        assert!(out.report.is_balanced());
        assert!(out.documents.iter().filter(|d| d.is_active()).all(|d| d.labels.len() == 12));
    }

    #[test]
    fn advertisement_dropped() {
        let bl = default_blocklist();
        let labels = |v1: &str, v2: &str| {
            BTreeMap::from([
                ("doc_type_v1".to_string(), v1.to_string()),
                ("doc_type_v2".to_string(), v2.to_string()),
            ])
        };
        assert_eq!(educational_filter(&labels("Advertisement", "News"), &bl), Verdict::Drop(NON_EDUCATIONAL));
        assert_eq!(educational_filter(&labels("News", "Advertisement"), &bl), Verdict::Drop(NON_EDUCATIONAL));
        assert_eq!(educational_filter(&labels("News", "Personal Blog"), &bl), Verdict::Keep);
        assert_eq!(educational_filter(&labels("Advertisement", "x"), &BTreeSet::new()), Verdict::Keep);
    }

    #[test]
    fn blocklist_enumeration() {
        let universe = ["News", "Advertisement", "Spam", "Academic Writing"];
        let bl: BTreeSet<String> = ["Advertisement", "Spam"].iter().map(|s| s.to_string()).collect();
        for a in universe {
            for b in universe {
                let labels = BTreeMap::from([
                    ("doc_type_v1".to_string(), a.to_string()),
                    ("doc_type_v2".to_string(), b.to_string()),
                ]);
                let expect = bl.contains(a) || bl.contains(b);
                assert_eq!(educational_filter(&labels, &bl) != Verdict::Keep, expect, "{a} {b}");
            }
        }
    }

    #[test]
    fn discipline_from_labels_unless_metadata() {
        let map = DisciplineMap::packaged();
        let mut d = Document::new("a", "t");
        d.labels.insert("fdc_code".into(), "615.8".into());
        assert_eq!(assign_discipline(&mut d, &map), "medicine");
        assert_eq!(d.discipline, Some(crate::corpus::Discipline::Medicine));

        let mut m = Document::new("b", "t");
        m.discipline = Some(crate::corpus::Discipline::Physics);
        m.labels.insert("fdc_code".into(), "5".into());
        assert_eq!(assign_discipline(&mut m, &map), "computer_science");
        assert_eq!(m.discipline, Some(crate::corpus::Discipline::Physics));

        let mut u = Document::new("c", "t");
        u.labels.insert("fdc_code".into(), "n/a".into());
        assert_eq!(assign_discipline(&mut u, &map), UNMAPPED);
        assert_eq!(u.discipline, None);
    }
}
