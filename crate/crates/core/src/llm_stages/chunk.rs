use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::corpus::Tokenizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChunkUnit {
    Chars,
    Tokens,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChunkStatus {
    Pending,
    Cleaned,
    Failed,
    RetainedOriginal,
}

/// A contiguous slice of a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub index: usize,
    pub unit: ChunkUnit,
    /// Half-open range in `unit`s (characters or tokens).
    pub span: (usize, usize),
    pub byte_span: Range<usize>,
    pub text: String,
    pub status: ChunkStatus,
}

const CLOSERS: [char; 6] = [')', ']', '"', '\'', '\u{201D}', '\u{2019}'];

fn ends_sentence(s: &str) -> bool {
    let s = s.trim_end_matches(CLOSERS);
    s.ends_with(['.', '!', '?'])
}

/// Splits `text` into chunks of at most `window` units.
///
/// Each chunk is filled greedily; when the rest does not fit, the cut goes at
/// the last paragraph break inside the window, else after the last sentence
/// end, else exactly at the window. Whitespace at a cut stays with the earlier
/// chunk, so the chunks concatenate back to `text`.
pub fn chunk_text(
    doc_id: &str,
    text: &str,
    unit: ChunkUnit,
    window: usize,
    tokenizer: &dyn Tokenizer,
) -> Vec<Chunk> {
    assert!(window >= 1, "chunk window must be at least 1");
    if text.is_empty() {
        return Vec::new();
    }
    // Cut positions: `bounds[k]` is the byte offset where unit k starts.
    let (cuts, units): (Vec<usize>, usize) = match unit {
        ChunkUnit::Chars => {
            let plan = plan_chars(text, window);
            let n = text.chars().count();
            (plan, n)
        }
        ChunkUnit::Tokens => {
            let spans = tokenizer.spans(text);
            (plan_tokens(text, &spans, window), spans.len())
        }
    };
    // `cuts` holds unit indices of chunk starts, always beginning with 0.
    let byte_of = byte_locator(text, unit, tokenizer);
    let mut chunks = Vec::with_capacity(cuts.len());
    for (k, &start) in cuts.iter().enumerate() {
        let end = cuts.get(k + 1).copied().unwrap_or(units);
        let b0 = if k == 0 { 0 } else { byte_of(start) };
        let b1 = if k + 1 == cuts.len() { text.len() } else { byte_of(end) };
        chunks.push(Chunk {
            doc_id: doc_id.to_string(),
            index: k,
            unit,
            span: (start, end),
            byte_span: b0..b1,
            text: text[b0..b1].to_string(),
            status: ChunkStatus::Pending,
        });
    }
    chunks
}

fn byte_locator<'a>(text: &'a str, unit: ChunkUnit, tokenizer: &dyn Tokenizer) -> Box<dyn Fn(usize) -> usize + 'a> {
    match unit {
        ChunkUnit::Chars => {
            let offsets: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
            Box::new(move |k| offsets.get(k).copied().unwrap_or(text.len()))
        }
        ChunkUnit::Tokens => {
            let starts: Vec<usize> = tokenizer.spans(text).iter().map(|s| s.start).collect();
            Box::new(move |k| starts.get(k).copied().unwrap_or(text.len()))
        }
    }
}

fn plan_chars(text: &str, window: usize) -> Vec<usize> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut cuts = vec![0];
    let mut start = 0;
    while n - start > window {
        let limit = start + window;
        let para = (start + 2..=limit)
            .rev()
            .find(|&p| chars[p - 1] == '\n' && chars[p - 2] == '\n' && p < n && chars[p] != '\n');
        let sentence = || {
            (start + 2..=limit).rev().find(|&p| {
                chars[p - 1].is_whitespace() && {
                    let mut q = p - 1;
                    while q > start && CLOSERS.contains(&chars[q - 1]) {
                        q -= 1;
                    }
                    q > start && matches!(chars[q - 1], '.' | '!' | '?')
                }
            })
        };
        let cut = para.or_else(sentence).unwrap_or(limit);
        cuts.push(cut);
        start = cut;
    }
    cuts
}

fn plan_tokens(text: &str, spans: &[Range<usize>], window: usize) -> Vec<usize> {
    let n = spans.len();
    let mut cuts = vec![0];
    let mut start = 0;
    while n - start > window {
        let limit = start + window;
        let gap = |k: usize| &text[spans[k - 1].end..spans[k].start];
        let para = (start + 1..=limit).rev().find(|&k| gap(k).contains("\n\n"));
        let sentence = || {
            (start + 1..=limit)
                .rev()
                .find(|&k| !gap(k).is_empty() && ends_sentence(&text[spans[k - 1].clone()]))
        };
        let cut = para.or_else(sentence).unwrap_or(limit);
        cuts.push(cut);
        start = cut;
    }
    cuts
}
