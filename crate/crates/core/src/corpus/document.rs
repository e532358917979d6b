use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::normalize::normalize;
use super::CorpusError;

/// Book/paper split label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocType {
    Book,
    Paper,
    #[default]
    Unknown,
}

impl DocType {
    pub fn as_str(self) -> &'static str {
        match self {
            DocType::Book => "book",
            DocType::Paper => "paper",
            DocType::Unknown => "unknown",
        }
    }
}

/// The nine top-level disciplines used to organise the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discipline {
    ComputerScience,
    Engineering,
    HumanSocial,
    Medicine,
    Biology,
    Chemistry,
    Mathematics,
    Physics,
    StemOthers,
}

impl Discipline {
    pub const ALL: [Discipline; 9] = [
        Discipline::ComputerScience,
        Discipline::Engineering,
        Discipline::HumanSocial,
        Discipline::Medicine,
        Discipline::Biology,
        Discipline::Chemistry,
        Discipline::Mathematics,
        Discipline::Physics,
        Discipline::StemOthers,
    ];

    /// Human-readable name as used in portrait tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Discipline::ComputerScience => "Computer Science",
            Discipline::Engineering => "Engineering",
            Discipline::HumanSocial => "Human & Social",
            Discipline::Medicine => "Medicine",
            Discipline::Biology => "Biology",
            Discipline::Chemistry => "Chemistry",
            Discipline::Mathematics => "Mathematics",
            Discipline::Physics => "Physics",
            Discipline::StemOthers => "STEM Others",
        }
    }
}

/// Processing level reached by a document.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
pub enum Level {
    #[default]
    L0,
    L1,
    L2,
    L3,
    L4,
    L5,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Lifecycle status. Dropped and failed documents keep their reason.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    #[default]
    Active,
    Dropped(String),
    Failed(String),
}

/// One corpus unit.
///
/// `text` is always stored normalized and `byte_len` tracks it; both are only
/// reachable through accessors so the pair cannot drift apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "DocumentRecord")]
pub struct Document {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default)]
    pub doc_type: DocType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discipline: Option<Discipline>,
    text: String,
    byte_len: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_count: Option<u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<String, String>,
    stage: Level,
    status: Status,
}

#[derive(Deserialize)]
struct DocumentRecord {
    id: String,
    #[serde(default)]
    source: Option<String>,
    #[serde(default)]
    doc_type: DocType,
    #[serde(default)]
    discipline: Option<Discipline>,
    text: String,
    #[serde(default)]
    token_count: Option<u64>,
    #[serde(default)]
    labels: BTreeMap<String, String>,
    #[serde(default)]
    stage: Level,
    #[serde(default)]
    status: Status,
}

impl From<DocumentRecord> for Document {
    fn from(r: DocumentRecord) -> Self {
        let mut doc = Document::new(r.id, &r.text);
        doc.source = r.source;
        doc.doc_type = r.doc_type;
        doc.discipline = r.discipline;
        doc.token_count = r.token_count;
        doc.labels = r.labels;
        doc.stage = r.stage;
        doc.status = r.status;
        doc
    }
}

impl Document {
    /// Builds an active L0 document; the text is normalized on the way in.
    pub fn new(id: impl Into<String>, text: &str) -> Self {
        let text = normalize(text);
        Document {
            id: id.into(),
            source: None,
            doc_type: DocType::Unknown,
            discipline: None,
            byte_len: text.len(),
            text,
            token_count: None,
            labels: BTreeMap::new(),
            stage: Level::L0,
            status: Status::Active,
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn byte_len(&self) -> usize {
        self.byte_len
    }

    /// Replaces the text (normalizing it) and invalidates the cached token count.
    pub fn set_text(&mut self, text: &str) {
        self.text = normalize(text);
        self.byte_len = self.text.len();
        self.token_count = None;
    }

    pub fn stage(&self) -> Level {
        self.stage
    }

    /// Moves the document to `level`. Stages never go backwards.
    pub fn advance(&mut self, level: Level) -> Result<(), CorpusError> {
        if level < self.stage {
            return Err(CorpusError::StageRegression {
                id: self.id.clone(),
                from: self.stage,
                to: level,
            });
        }
        self.stage = level;
        Ok(())
    }

    /// Like [`advance`](Self::advance) but a no-op when already at or past `level`.
    pub fn reach(&mut self, level: Level) {
        self.stage = self.stage.max(level);
    }

    pub fn status(&self) -> &Status {
        &self.status
    }

    pub fn is_active(&self) -> bool {
        self.status == Status::Active
    }

    /// Marks the document dropped. A document records exactly one drop reason,
    /// so dropping an already dropped document keeps the first reason.
    pub fn drop_with(&mut self, reason: impl Into<String>) {
        if self.is_active() {
            self.status = Status::Dropped(reason.into());
        }
    }

    pub fn fail_with(&mut self, reason: impl Into<String>) {
        if self.is_active() {
            self.status = Status::Failed(reason.into());
        }
    }

    /// Returns a failed document to the active set, e.g. when it is requeued.
    pub fn reactivate(&mut self) {
        if matches!(self.status, Status::Failed(_)) {
            self.status = Status::Active;
        }
    }
}
