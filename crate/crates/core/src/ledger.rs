//! Append-only record of completed work, keyed by `(task_id, stage)`.
//!
//! Work may run more than once after a crash; the ledger is what makes the
//! second completion a no-op.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub task_id: String,
    pub stage: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub detail: Value,
}

impl LedgerEntry {
    pub fn new(task_id: impl Into<String>, stage: impl Into<String>, detail: Value) -> Self {
        LedgerEntry {
            task_id: task_id.into(),
            stage: stage.into(),
            detail,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("{task_id} already completed {stage}")]
    Duplicate { task_id: String, stage: String },
    #[error("ledger line {line}: {msg}")]
    Corrupt { line: usize, msg: String },
    #[error("ledger io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Default)]
struct Inner {
    entries: HashMap<(String, String), LedgerEntry>,
    order: Vec<(String, String)>,
    file: Option<File>,
}

#[derive(Debug, Default)]
pub struct Ledger {
    path: Option<PathBuf>,
    inner: Mutex<Inner>,
}

impl Ledger {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads an existing ledger (if any) and appends to it from then on.
    /// A torn final line, as left by a crash mid-write, is cut off.
    pub fn open(path: &Path) -> Result<Self, LedgerError> {
        let mut inner = Inner::default();
        let content = if path.exists() { std::fs::read_to_string(path)? } else { String::new() };
        let mut good_end = 0;
        let mut offset = 0;
        let line_count = content.split_inclusive('\n').count();
        for (k, line) in content.split_inclusive('\n').enumerate() {
            offset += line.len();
            if line.trim().is_empty() {
                good_end = offset;
                continue;
            }
            let e: LedgerEntry = match serde_json::from_str(line.trim_end()) {
                Ok(e) => e,
                Err(_) if k + 1 == line_count && !line.ends_with('\n') => break,
                Err(err) => {
                    return Err(LedgerError::Corrupt {
                        line: k + 1,
                        msg: err.to_string(),
                    })
                }
            };
            good_end = offset;
            let key = (e.task_id.clone(), e.stage.clone());
            if inner.entries.insert(key.clone(), e).is_none() {
                inner.order.push(key);
            }
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        if good_end < content.len() {
            file.set_len(good_end as u64)?;
        } else if !content.is_empty() && !content.ends_with('\n') {
            file.write_all(b"\n")?;
        }
        inner.file = Some(file);
        Ok(Ledger {
            path: Some(path.to_path_buf()),
            inner: Mutex::new(inner),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Records a completion; a second completion of the same pair is rejected.
    pub fn record(&self, entry: LedgerEntry) -> Result<(), LedgerError> {
        let mut g = self.lock();
        let key = (entry.task_id.clone(), entry.stage.clone());
        if g.entries.contains_key(&key) {
            return Err(LedgerError::Duplicate {
                task_id: entry.task_id,
                stage: entry.stage,
            });
        }
        if let Some(f) = g.file.as_mut() {
            let mut line = serde_json::to_vec(&entry).expect("entry serializes");
            line.push(b'\n');
            f.write_all(&line)?;
            f.flush()?;
        }
        g.entries.insert(key.clone(), entry);
        g.order.push(key);
        Ok(())
    }

    pub fn contains(&self, task_id: &str, stage: &str) -> bool {
        self.lock().entries.contains_key(&(task_id.to_string(), stage.to_string()))
    }

    pub fn get(&self, task_id: &str, stage: &str) -> Option<LedgerEntry> {
        self.lock().entries.get(&(task_id.to_string(), stage.to_string())).cloned()
    }

    pub fn len(&self) -> usize {
        self.lock().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Entries in the order they were first recorded.
    pub fn entries(&self) -> Vec<LedgerEntry> {
        let g = self.lock();
        g.order.iter().map(|k| g.entries[k].clone()).collect()
    }
}
