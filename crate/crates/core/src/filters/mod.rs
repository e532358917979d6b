//! L2 rule filters and L3 label-driven filtering.

mod book_paper;
mod fdc;
mod labels;
mod language;
mod rules;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Level, StageOutput, StageReport};

pub use book_paper::{
    apply_verdict, classify_book_paper, excerpt, parse_reply, BookPaperConfig, BookPaperVerdict,
    FAILED as BOOK_PAPER_FAILED,
};
pub use fdc::{discipline_for, DisciplineMap, FdcEntry, FdcMatch, FdcParseError, UNMAPPED};
pub use labels::{
    apply_labels, assign_discipline, complete_l3, default_blocklist, educational_filter, fail_reason,
    label_stage, LabelConfig, LabelReport, NON_EDUCATIONAL, TYPE_DIMENSIONS,
};
pub use language::{
    language_filter, DetectError, Detection, LanguageCheck, LanguageDetector, TrigramDetector,
    NON_TARGET_LANGUAGE,
};
pub use rules::{garbled_filter, garbled_ratio, is_garbled, size_filter, GARBLED, UNDERSIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Keep,
    Drop(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuleConfig {
    pub min_bytes: usize,
    pub max_garbled_ratio: f64,
    pub target_language: String,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            min_bytes: 8192,
            max_garbled_ratio: 0.5,
            target_language: "en".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rule config: {0}")]
pub struct RuleConfigError(pub String);

impl RuleConfig {
    pub fn validate(&self) -> Result<(), RuleConfigError> {
        if !(0.0..=1.0).contains(&self.max_garbled_ratio) {
            return Err(RuleConfigError(format!(
                "max_garbled_ratio {} outside [0, 1]",
                self.max_garbled_ratio
            )));
        }
        if self.target_language.is_empty() {
            return Err(RuleConfigError("target_language is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleReport {
    /// Documents kept because the language detector failed on them.
    pub language_fail_open: usize,
}

/// First failing rule, checked in the order size, garbled, language.
pub fn rule_verdict(
    doc: &Document,
    cfg: &RuleConfig,
    detector: &dyn LanguageDetector,
) -> (Verdict, bool) {
    for v in [size_filter(doc, cfg), garbled_filter(doc, cfg)] {
        if v != Verdict::Keep {
            return (v, false);
        }
    }
    let check = language_filter(doc, detector, cfg);
    (check.verdict, check.fail_open.is_some())
}

/// Applies the L2 rules to every active document. Survivors reach L2.
pub fn rule_stage(
    mut docs: Vec<Document>,
    cfg: &RuleConfig,
    detector: &dyn LanguageDetector,
) -> Result<(StageOutput, RuleReport), RuleConfigError> {
    cfg.validate()?;
    let verdicts: Vec<Option<(Verdict, bool)>> = docs
        .par_iter()
        .map(|d| d.is_active().then(|| rule_verdict(d, cfg, detector)))
        .collect();
    let mut report = StageReport::new("rules");
    let mut extra = RuleReport::default();
    for (doc, v) in docs.iter_mut().zip(verdicts) {
        let Some((verdict, fail_open)) = v else { continue };
        match verdict {
            Verdict::Keep => doc.reach(Level::L2),
            Verdict::Drop(r) => doc.drop_with(r),
        }
        extra.language_fail_open += fail_open as usize;
        report.record(doc);
    }
    Ok((StageOutput { documents: docs, report }, extra))
}
