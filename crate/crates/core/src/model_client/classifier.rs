use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Label dimensions produced by the document classifier.
pub const DEFAULT_DIMENSIONS: [&str; 12] = [
    "fdc_code",
    "fdc_code_secondary",
    "bloom_cognitive_process",
    "bloom_knowledge_domain",
    "doc_type_v1",
    "doc_type_v2",
    "extraction_artifacts",
    "missing_content",
    "reasoning_depth",
    "technical_correctness",
    "education_level",
    "content_quality",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClassifyError {
    #[error("label schema: {0}")]
    Schema(String),
    #[error("classifier timed out")]
    Timeout,
    #[error("classifier transport: {0}")]
    Transport(String),
}

/// Labels for one document, one value per configured dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelSet {
    pub dimensions: BTreeMap<String, String>,
}

impl LabelSet {
    /// Accepts `labels` only if its keys are exactly `expected`.
    pub fn validated(
        labels: BTreeMap<String, String>,
        expected: &[String],
    ) -> Result<Self, ClassifyError> {
        let missing: Vec<&str> = expected
            .iter()
            .filter(|d| !labels.contains_key(d.as_str()))
            .map(String::as_str)
            .collect();
        if !missing.is_empty() {
            return Err(ClassifyError::Schema(format!(
                "missing dimensions: {}",
                missing.join(", ")
            )));
        }
        let extra: Vec<&str> = labels
            .keys()
            .filter(|k| !expected.contains(k))
            .map(String::as_str)
            .collect();
        if !extra.is_empty() {
            return Err(ClassifyError::Schema(format!(
                "unexpected dimensions: {}",
                extra.join(", ")
            )));
        }
        Ok(LabelSet { dimensions: labels })
    }

    pub fn get(&self, dim: &str) -> Option<&str> {
        self.dimensions.get(dim).map(String::as_str)
    }

    /// Integer part of the `fdc_code` label ("615.8" gives 615).
    pub fn fdc_code(&self) -> Option<u16> {
        let raw = self.get("fdc_code")?.trim();
        let int = raw.split('.').next()?;
        int.parse().ok()
    }
}

pub fn default_dimensions() -> Vec<String> {
    DEFAULT_DIMENSIONS.iter().map(|s| s.to_string()).collect()
}

pub trait LabelClassifier: Send + Sync {
    fn dimensions(&self) -> &[String];

    fn classify(&self, text: &str) -> Result<LabelSet, ClassifyError>;

    /// One result per text, in input order.
    fn classify_batch(&self, texts: &[&str]) -> Vec<Result<LabelSet, ClassifyError>> {
        texts.iter().map(|t| self.classify(t)).collect()
    }
}

impl<C: LabelClassifier + ?Sized> LabelClassifier for std::sync::Arc<C> {
    fn dimensions(&self) -> &[String] {
        (**self).dimensions()
    }
    fn classify(&self, text: &str) -> Result<LabelSet, ClassifyError> {
        (**self).classify(text)
    }
}

type RawLabels = Result<BTreeMap<String, String>, ClassifyError>;

/// Adapts a closure returning raw label maps; output is schema-checked.
pub struct FnClassifier<F> {
    dims: Vec<String>,
    f: F,
}

impl<F> FnClassifier<F>
where
    F: Fn(&str) -> RawLabels + Send + Sync,
{
    pub fn new(f: F) -> Self {
        FnClassifier {
            dims: default_dimensions(),
            f,
        }
    }

    pub fn with_dimensions(dims: Vec<String>, f: F) -> Self {
        FnClassifier { dims, f }
    }
}

impl<F> LabelClassifier for FnClassifier<F>
where
    F: Fn(&str) -> RawLabels + Send + Sync,
{
    fn dimensions(&self) -> &[String] {
        &self.dims
    }

    fn classify(&self, text: &str) -> Result<LabelSet, ClassifyError> {
        LabelSet::validated((self.f)(text)?, &self.dims)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelRule {
    contains: String,
    #[serde(default)]
    labels: BTreeMap<String, String>,
    /// Simulate a timeout instead of answering.
    #[serde(default)]
    timeout: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelScript {
    #[serde(default = "default_dimensions")]
    dimensions: Vec<String>,
    #[serde(default)]
    rules: Vec<LabelRule>,
    #[serde(default)]
    default: BTreeMap<String, String>,
}

/// Fixture classifier. The first rule whose needle occurs in the text
/// overrides individual dimensions of the default label map.
///
/// Script file: `{"dimensions": [...], "default": {dim: label},
/// "rules": [{"contains": "...", "labels": {dim: label}, "timeout": false}]}`.
#[derive(Debug, Clone)]
pub struct ScriptedClassifier {
    script: LabelScript,
}

impl ScriptedClassifier {
    /// Every dimension labelled `"unknown"`, `fdc_code` = `fdc`,
    /// both document types `"Academic Writing"`.
    pub fn uniform(fdc: &str) -> Self {
        let mut default: BTreeMap<String, String> = DEFAULT_DIMENSIONS
            .iter()
            .map(|d| (d.to_string(), "unknown".to_string()))
            .collect();
        default.insert("fdc_code".into(), fdc.into());
        default.insert("fdc_code_secondary".into(), fdc.into());
        default.insert("doc_type_v1".into(), "Academic Writing".into());
        default.insert("doc_type_v2".into(), "Academic Writing".into());
        ScriptedClassifier {
            script: LabelScript {
                dimensions: default_dimensions(),
                rules: Vec::new(),
                default,
            },
        }
    }

    /// Overrides `labels` for texts containing `needle`.
    pub fn with_rule(mut self, needle: &str, labels: &[(&str, &str)]) -> Self {
        self.script.rules.push(LabelRule {
            contains: needle.into(),
            labels: labels
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            timeout: false,
        });
        self
    }

    pub fn with_timeout(mut self, needle: &str) -> Self {
        self.script.rules.push(LabelRule {
            contains: needle.into(),
            labels: BTreeMap::new(),
            timeout: true,
        });
        self
    }

    /// Drops `dim` from replies for texts containing `needle`.
    pub fn without_dimension(mut self, needle: &str, dim: &str) -> Self {
        self.script.rules.push(LabelRule {
            contains: needle.into(),
            labels: BTreeMap::from([(dim.to_string(), String::new())]),
            timeout: false,
        });
        self
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(ScriptedClassifier {
            script: serde_json::from_str(text)?,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, super::ScriptError> {
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| super::ScriptError::Io {
            path: display.clone(),
            source,
        })?;
        Self::from_json(&text).map_err(|source| super::ScriptError::Parse {
            path: display,
            source,
        })
    }
}

impl LabelClassifier for ScriptedClassifier {
    fn dimensions(&self) -> &[String] {
        &self.script.dimensions
    }

    fn classify(&self, text: &str) -> Result<LabelSet, ClassifyError> {
        let mut labels = self.script.default.clone();
        if let Some(rule) = self.script.rules.iter().find(|r| text.contains(&r.contains)) {
            if rule.timeout {
                return Err(ClassifyError::Timeout);
            }
            for (k, v) in &rule.labels {
                // An empty override removes the dimension.
                if v.is_empty() {
                    labels.remove(k);
                } else {
                    labels.insert(k.clone(), v.clone());
                }
            }
        }
        LabelSet::validated(labels, &self.script.dimensions)
    }
}
