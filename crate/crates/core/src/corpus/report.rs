use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::document::{Document, Status};

/// Mass-conservation record for one stage: every input is kept, dropped or failed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub input: usize,
    pub kept: usize,
    pub dropped: usize,
    pub failed: usize,
    pub drop_reasons: BTreeMap<String, usize>,
    pub fail_reasons: BTreeMap<String, usize>,
}

impl StageReport {
    pub fn new(stage: impl Into<String>) -> Self {
        StageReport {
            stage: stage.into(),
            ..Default::default()
        }
    }

    /// Tallies one document that entered the stage active, by its status afterwards.
    pub fn record(&mut self, doc: &Document) {
        self.input += 1;
        match doc.status() {
            Status::Active => self.kept += 1,
            Status::Dropped(r) => {
                self.dropped += 1;
                *self.drop_reasons.entry(r.clone()).or_default() += 1;
            }
            Status::Failed(r) => {
                self.failed += 1;
                *self.fail_reasons.entry(r.clone()).or_default() += 1;
            }
        }
    }

    pub fn is_balanced(&self) -> bool {
        self.input == self.kept + self.dropped + self.failed
            && self.drop_reasons.values().sum::<usize>() == self.dropped
            && self.fail_reasons.values().sum::<usize>() == self.failed
    }

    pub fn removal_rate(&self) -> f64 {
        if self.input == 0 {
            0.0
        } else {
            self.dropped as f64 / self.input as f64
        }
    }
}

/// Documents leaving a stage, including the ones it dropped or failed, plus the tally.
#[derive(Debug, Clone, Default)]
pub struct StageOutput {
    pub documents: Vec<Document>,
    pub report: StageReport,
}

impl StageOutput {
    pub fn active(&self) -> impl Iterator<Item = &Document> {
        self.documents.iter().filter(|d| d.is_active())
    }
}
