use std::collections::HashMap;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::CorpusError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenizerKind {
    Whitespace,
    /// A subword tokenizer registered at runtime under the spec's name.
    ByteFallbackBpeExternal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerSpec {
    pub name: String,
    pub kind: TokenizerKind,
}

impl TokenizerSpec {
    pub fn whitespace() -> Self {
        TokenizerSpec {
            name: "whitespace".into(),
            kind: TokenizerKind::Whitespace,
        }
    }
}

impl Default for TokenizerSpec {
    fn default() -> Self {
        Self::whitespace()
    }
}

/// Splits text into tokens reported as byte spans.
///
/// Spans are sorted, non-overlapping and lie on char boundaries. The chunkers
/// rely on this to cut text only between tokens.
pub trait Tokenizer: Send + Sync {
    fn spans(&self, text: &str) -> Vec<Range<usize>>;

    fn count(&self, text: &str) -> usize {
        self.spans(text).len()
    }
}

/// Tokens are maximal runs of non-whitespace characters.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn spans(&self, text: &str) -> Vec<Range<usize>> {
        let mut spans = Vec::new();
        let mut start = None;
        for (i, c) in text.char_indices() {
            match (c.is_whitespace(), start) {
                (true, Some(s)) => {
                    spans.push(s..i);
                    start = None;
                }
                (false, None) => start = Some(i),
                _ => {}
            }
        }
        if let Some(s) = start {
            spans.push(s..text.len());
        }
        spans
    }

    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

/// Resolves [`TokenizerSpec`]s. The whitespace tokenizer is always available;
/// external tokenizers must be registered by name.
#[derive(Clone, Default)]
pub struct TokenizerRegistry {
    external: HashMap<String, Arc<dyn Tokenizer>>,
}

impl TokenizerRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, tokenizer: Arc<dyn Tokenizer>) {
        self.external.insert(name.into(), tokenizer);
    }

    pub fn resolve(&self, spec: &TokenizerSpec) -> Result<Arc<dyn Tokenizer>, CorpusError> {
        match spec.kind {
            TokenizerKind::Whitespace => Ok(Arc::new(WhitespaceTokenizer)),
            TokenizerKind::ByteFallbackBpeExternal => self
                .external
                .get(&spec.name)
                .cloned()
                .ok_or_else(|| CorpusError::UnknownTokenizer(spec.name.clone())),
        }
    }
}

impl std::fmt::Debug for TokenizerRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TokenizerRegistry")
            .field("external", &self.external.keys().collect::<Vec<_>>())
            .finish()
    }
}

/// Counts tokens with the built-in registry (whitespace only).
pub fn count_tokens(text: &str, spec: &TokenizerSpec) -> Result<usize, CorpusError> {
    Ok(TokenizerRegistry::new().resolve(spec)?.count(text))
}
