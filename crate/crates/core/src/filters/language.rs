use std::collections::BTreeMap;

use super::{RuleConfig, Verdict};
use crate::corpus::Document;

pub const NON_TARGET_LANGUAGE: &str = "non_target_language";

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub code: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("language detection failed: {0}")]
pub struct DetectError(pub String);

pub trait LanguageDetector: Send + Sync {
    fn detect(&self, text: &str) -> Result<Detection, DetectError>;
}

impl<F> LanguageDetector for F
where
    F: Fn(&str) -> Result<Detection, DetectError> + Send + Sync,
{
    fn detect(&self, text: &str) -> Result<Detection, DetectError> {
        self(text)
    }
}

/// Outcome of the language rule. A detector error keeps the document
/// and carries the error so callers can count it.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageCheck {
    pub verdict: Verdict,
    pub fail_open: Option<DetectError>,
}

pub fn language_filter(
    doc: &Document,
    detector: &dyn LanguageDetector,
    cfg: &RuleConfig,
) -> LanguageCheck {
    match detector.detect(doc.text()) {
        Ok(d) if d.code == cfg.target_language => LanguageCheck {
            verdict: Verdict::Keep,
            fail_open: None,
        },
        Ok(_) => LanguageCheck {
            verdict: Verdict::Drop(NON_TARGET_LANGUAGE),
            fail_open: None,
        },
        Err(e) => {
            log::warn!("{}: {e}; keeping document", doc.id);
            LanguageCheck {
                verdict: Verdict::Keep,
                fail_open: Some(e),
            }
        }
    }
}

const PROFILES: [(&str, &str); 4] = [
    ("en", include_str!("../../data/lang/en.txt")),
    ("fr", include_str!("../../data/lang/fr.txt")),
    ("de", include_str!("../../data/lang/de.txt")),
    ("es", include_str!("../../data/lang/es.txt")),
];

/// Characters of input inspected per document.
const SAMPLE_CHARS: usize = 8192;
const MIN_TRIGRAMS: usize = 20;

/// Reference detector: cosine similarity of character-trigram frequencies
/// against small embedded profiles for en, fr, de and es.
pub struct TrigramDetector {
    profiles: Vec<(String, BTreeMap<[char; 3], f64>)>,
}

impl TrigramDetector {
    pub fn reference() -> Self {
        TrigramDetector {
            profiles: PROFILES
                .iter()
                .map(|(code, text)| (code.to_string(), unit_vector(trigrams(text))))
                .collect(),
        }
    }

    pub fn languages(&self) -> Vec<&str> {
        self.profiles.iter().map(|(c, _)| c.as_str()).collect()
    }
}

impl Default for TrigramDetector {
    fn default() -> Self {
        Self::reference()
    }
}

fn trigrams(text: &str) -> BTreeMap<[char; 3], f64> {
    let mut counts = BTreeMap::new();
    let mut window = [' '; 3];
    let mut filled = 1;
    let mut last_space = true;
    for c in text.chars().take(SAMPLE_CHARS) {
        let c = if c.is_alphabetic() {
            c.to_lowercase().next().unwrap_or(c)
        } else {
            ' '
        };
        if c == ' ' && last_space {
            continue;
        }
        last_space = c == ' ';
        window = [window[1], window[2], c];
        filled += 1;
        if filled >= 3 {
            *counts.entry(window).or_insert(0.0) += 1.0;
        }
    }
    counts
}

fn unit_vector(mut v: BTreeMap<[char; 3], f64>) -> BTreeMap<[char; 3], f64> {
    let norm = v.values().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.values_mut().for_each(|x| *x /= norm);
    }
    v
}

impl LanguageDetector for TrigramDetector {
    fn detect(&self, text: &str) -> Result<Detection, DetectError> {
        let grams = trigrams(text);
        let n: f64 = grams.values().sum();
        if (n as usize) < MIN_TRIGRAMS {
            return Err(DetectError(format!("too little text ({n} trigrams)")));
        }
        let v = unit_vector(grams);
        let scores: Vec<(&str, f64)> = self
            .profiles
            .iter()
            .map(|(code, p)| {
                let dot = v.iter().filter_map(|(g, x)| p.get(g).map(|y| x * y)).sum();
                (code.as_str(), dot)
            })
            .collect();
        let total: f64 = scores.iter().map(|(_, s)| s).sum();
        let (code, best) = scores
            .iter()
            .copied()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("profiles are non-empty");
        if best <= 0.0 {
            return Err(DetectError("no trigram overlap with any profile".into()));
        }
        Ok(Detection {
            code: code.to_string(),
            confidence: best / total,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed(code: &'static str) -> impl Fn(&str) -> Result<Detection, DetectError> {
        move |_| {
            Ok(Detection {
                code: code.into(),
                confidence: 0.99,
            })
        }
    }

    #[test]
    fn matching_code_kept() {
        let d = Document::new("a", "x");
        let check = language_filter(&d, &fixed("en"), &RuleConfig::default());
        assert_eq!(check.verdict, Verdict::Keep);
        let check = language_filter(&d, &fixed("fr"), &RuleConfig::default());
        assert_eq!(check.verdict, Verdict::Drop(NON_TARGET_LANGUAGE));
    }

    #[test]
    fn errors_fail_open() {
        let flaky = |t: &str| {
            if t.starts_with("bad") {
                Err(DetectError("boom".into()))
            } else {
                Ok(Detection {
                    code: "en".into(),
                    confidence: 1.0,
                })
            }
        };
        let docs: Vec<Document> = (0..50)
            .map(|i| Document::new(i.to_string(), if i % 25 == 3 { "bad" } else { "fine" }))
            .collect();
        let checks: Vec<_> = docs
            .iter()
            .map(|d| language_filter(d, &flaky, &RuleConfig::default()))
            .collect();
        assert!(checks.iter().all(|c| c.verdict == Verdict::Keep));
        assert_eq!(checks.iter().filter(|c| c.fail_open.is_some()).count(), 2);
    }

    #[test]
    fn reference_detector_separates_languages() {
        let det = TrigramDetector::reference();
        let cases = [
            ("en", "The results of the experiment show that the temperature of the sample increases with the applied pressure, which is consistent with the model."),
            ("fr", "Les résultats de l'expérience montrent que la température de l'échantillon augmente avec la pression appliquée, ce qui est conforme au modèle."),
            ("de", "Die Ergebnisse des Experiments zeigen, dass die Temperatur der Probe mit dem angelegten Druck steigt, was mit dem Modell übereinstimmt."),
            ("es", "Los resultados del experimento muestran que la temperatura de la muestra aumenta con la presión aplicada, lo que concuerda con el modelo."),
        ];
        for (code, text) in cases {
            let d = det.detect(text).unwrap();
            assert_eq!(d.code, code, "{text}");
            assert!(d.confidence > 0.25 && d.confidence <= 1.0);
        }
    }

    #[test]
    fn short_or_symbolic_text_errors() {
        let det = TrigramDetector::reference();
        assert!(det.detect("hi").is_err());
        assert!(det.detect("1234 5678 %%%% ---- 9999 0000 1111 2222 3333").is_err());
    }

    #[test]
    fn deterministic() {
        let det = TrigramDetector::reference();
        let t = "Proteins fold into three dimensional structures determined by their sequence.";
        assert_eq!(det.detect(t), det.detect(t));
    }
}
