use unicode_general_category::{get_general_category, GeneralCategory as G};

use super::{RuleConfig, Verdict};
use crate::corpus::Document;

pub const UNDERSIZE: &str = "undersize";
pub const GARBLED: &str = "garbled";

pub fn size_filter(doc: &Document, cfg: &RuleConfig) -> Verdict {
    if doc.byte_len() < cfg.min_bytes {
        Verdict::Drop(UNDERSIZE)
    } else {
        Verdict::Keep
    }
}

/// Replacement characters, control characters other than tab and newline,
/// and anything outside the letter, number, punctuation, symbol and
/// separator categories.
pub fn is_garbled(c: char) -> bool {
    if c == '\u{FFFD}' {
        return true;
    }
    if c == '\t' || c == '\n' {
        return false;
    }
    matches!(
        get_general_category(c),
        G::Control
            | G::Format
            | G::Surrogate
            | G::PrivateUse
            | G::Unassigned
            | G::NonspacingMark
            | G::SpacingMark
            | G::EnclosingMark
    )
}

/// Fraction of characters (Unicode scalar values) that are garbled; 0 for empty text.
pub fn garbled_ratio(text: &str) -> f64 {
    let (mut total, mut bad) = (0usize, 0usize);
    for c in text.chars() {
        total += 1;
        bad += is_garbled(c) as usize;
    }
    if total == 0 {
        0.0
    } else {
        bad as f64 / total as f64
    }
}

pub fn garbled_filter(doc: &Document, cfg: &RuleConfig) -> Verdict {
    if garbled_ratio(doc.text()) > cfg.max_garbled_ratio {
        Verdict::Drop(GARBLED)
    } else {
        Verdict::Keep
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc_of_len(n: usize) -> Document {
        Document::new("d", &"a".repeat(n))
    }

    #[test]
    fn size_boundary() {
        let cfg = RuleConfig::default();
        assert_eq!(size_filter(&doc_of_len(8191), &cfg), Verdict::Drop(UNDERSIZE));
        assert_eq!(size_filter(&doc_of_len(8192), &cfg), Verdict::Keep);
    }

    #[test]
    fn size_counts_bytes_not_chars() {
        // 4096 two-byte characters are 8192 bytes.
        let d = Document::new("d", &"é".repeat(4096));
        assert_eq!(size_filter(&d, &RuleConfig::default()), Verdict::Keep);
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(garbled_ratio("The cell membrane regulates transport."), 0.0);
        assert_eq!(garbled_ratio(&"\u{FFFD}".repeat(10)), 1.0);
        assert_eq!(garbled_ratio(""), 0.0);
        assert_eq!(garbled_ratio("a\tb\nc"), 0.0);
    }

    #[test]
    fn thirty_seven_controls() {
        let mut s: Vec<char> = "x".repeat(63).chars().collect();
        for k in 0..37 {
            s.insert(k * 2, '\u{0007}');
        }
        let s: String = s.into_iter().collect();
        assert_eq!(s.chars().count(), 100);
        assert!((garbled_ratio(&s) - 0.37).abs() < 1e-12);
    }

    #[test]
    fn garbled_threshold_is_strict() {
        let cfg = RuleConfig::default();
        let mk = |bad: usize| Document::new("d", &format!("{}{}", "\u{FFFD}".repeat(bad), "a".repeat(100 - bad)));
        assert_eq!(garbled_filter(&mk(51), &cfg), Verdict::Drop(GARBLED));
        assert_eq!(garbled_filter(&mk(50), &cfg), Verdict::Keep);
    }

    #[test]
    fn category_coverage() {
        for c in ['\u{0000}', '\u{200B}', '\u{E000}', '\u{0301}', '\u{FFFD}'] {
            assert!(is_garbled(c), "{c:?}");
        }
        for c in ['a', 'Z', '7', '.', '+', '$', ' ', '\u{00A0}', '\u{4E2D}', 'λ'] {
            assert!(!is_garbled(c), "{c:?}");
        }
    }

    proptest! {
        #[test]
        fn ratio_in_unit_interval(s in any::<String>()) {
            let r = garbled_ratio(&s);
            prop_assert!((0.0..=1.0).contains(&r));
        }

        #[test]
        fn ratio_matches_count(clean in "[a-z ]{0,50}", bad in 0usize..50) {
            let s = format!("{clean}{}", "\u{FFFD}".repeat(bad));
            let total = s.chars().count();
            let expect = if total == 0 { 0.0 } else { bad as f64 / total as f64 };
            prop_assert_eq!(garbled_ratio(&s), expect);
        }
    }
}
