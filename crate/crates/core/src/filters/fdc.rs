use serde::Serialize;

use crate::corpus::Discipline;

pub const UNMAPPED: &str = "unmapped";

const PACKAGED: &str = include_str!("../../data/fdc_map.tsv");

/// One code range of the discipline table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FdcEntry {
    pub start: u16,
    pub end: u16,
    pub category: String,
    pub higher_level: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdcMatch<'a> {
    Mapped {
        category: &'a str,
        higher_level: &'a str,
    },
    Unmapped,
}

impl FdcMatch<'_> {
    pub fn category(&self) -> &str {
        match self {
            FdcMatch::Mapped { category, .. } => category,
            FdcMatch::Unmapped => UNMAPPED,
        }
    }

    pub fn discipline(&self) -> Option<Discipline> {
        match self {
            FdcMatch::Mapped { higher_level, .. } => discipline_for(higher_level),
            FdcMatch::Unmapped => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("discipline table line {line}: {msg}")]
pub struct FdcParseError {
    pub line: usize,
    pub msg: String,
}

/// Higher-level group names as they appear in the table.
pub fn discipline_for(higher_level: &str) -> Option<Discipline> {
    Some(match higher_level {
        "computer science" => Discipline::ComputerScience,
        "engineer" => Discipline::Engineering,
        "mathematics" => Discipline::Mathematics,
        "physics" => Discipline::Physics,
        "chemistry" => Discipline::Chemistry,
        "biology" => Discipline::Biology,
        "medicine" => Discipline::Medicine,
        "stem-others" => Discipline::StemOthers,
        "humansocial" => Discipline::HumanSocial,
        _ => return None,
    })
}

/// Ordered code-range table; lookups take the first matching range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisciplineMap {
    entries: Vec<FdcEntry>,
}

impl DisciplineMap {
    pub fn packaged() -> Self {
        Self::parse(PACKAGED).expect("packaged discipline table")
    }

    /// Tab-separated `higher_level  ranges  category`; ranges are
    /// comma-separated `NNN` or `NNN-NNN`. `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, FdcParseError> {
        let mut entries = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let err = |msg: String| FdcParseError { line: k + 1, msg };
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let [higher, ranges, category] = cols[..] else {
                return Err(err(format!("expected 3 columns, found {}", cols.len())));
            };
            if discipline_for(higher).is_none() {
                return Err(err(format!("unknown higher level {higher:?}")));
            }
            for part in ranges.split(',') {
                let part = part.trim();
                let (a, b) = part.split_once('-').unwrap_or((part, part));
                let parse = |s: &str| {
                    s.trim()
                        .parse::<u16>()
                        .ok()
                        .filter(|&c| c <= 999)
                        .ok_or_else(|| err(format!("bad code {s:?}")))
                };
                let (start, end) = (parse(a)?, parse(b)?);
                if start > end {
                    return Err(err(format!("empty range {part}")));
                }
                entries.push(FdcEntry {
                    start,
                    end,
                    category: category.trim().to_string(),
                    higher_level: higher.to_string(),
                });
            }
        }
        Ok(DisciplineMap { entries })
    }

    pub fn entries(&self) -> &[FdcEntry] {
        &self.entries
    }

    pub fn lookup(&self, code: u16) -> FdcMatch<'_> {
        self.entries
            .iter()
            .find(|e| (e.start..=e.end).contains(&code))
            .map_or(FdcMatch::Unmapped, |e| FdcMatch::Mapped {
                category: &e.category,
                higher_level: &e.higher_level,
            })
    }
}
