use std::borrow::Cow;

const BOM: char = '\u{feff}';

/// Canonicalizes text: drops byte-order marks and maps `\r\n` and lone `\r` to `\n`.
///
/// Total and idempotent.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().filter(|&c| c != BOM).peekable();
    while let Some(c) = chars.next() {
        if c == '\r' {
            if chars.peek() == Some(&'\n') {
                chars.next();
            }
            out.push('\n');
        } else {
            out.push(c);
        }
    }
    out
}

/// Decodes raw bytes as UTF-8, replacing each invalid sequence with one
/// U+FFFD, then normalizes.
pub fn normalize_bytes(bytes: &[u8]) -> String {
    match String::from_utf8_lossy(bytes) {
        Cow::Borrowed(s) => normalize(s),
        Cow::Owned(s) => normalize(&s),
    }
}
