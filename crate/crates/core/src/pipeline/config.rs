use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::benchgen::BenchgenConfig;
use crate::corpus::{GroupBy, TokenizerKind, TokenizerSpec};
use crate::dedup::DedupConfig;
use crate::filters::{BookPaperConfig, LabelConfig, RuleConfig};
use crate::llm_stages::StageConfig;
use crate::model_client::BackoffPolicy;
use crate::orchestrator::OrchestratorConfig;

use super::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Line-delimited documents.
    pub input: PathBuf,
    /// Input is the output of an earlier run: keep each document's stage and status.
    #[serde(default)]
    pub keep_input_state: bool,
    pub output_dir: PathBuf,
    #[serde(default = "TokenizerSpec::whitespace")]
    pub tokenizer: TokenizerSpec,
    #[serde(default)]
    pub models: ModelsConfig,
    #[serde(default)]
    pub queue: LocalQueueConfig,
    pub stages: Vec<StageSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelsConfig {
    pub teacher: Option<ModelSpec>,
    pub book_paper: Option<ModelSpec>,
    pub labeler: Option<LabelerSpec>,
    pub generator: Option<ModelSpec>,
    pub judge: Option<ModelSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Replies from a script file.
    Scripted { script: PathBuf },
    /// Echoes each refinement or completion chunk unchanged.
    Identity {},
    /// Chat-completions endpoint.
    Http {
        base_url: String,
        #[serde(default)]
        token_env: Option<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
        #[serde(default)]
        retry: BackoffPolicy,
    },
}

fn default_timeout() -> u64 {
    300
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LabelerSpec {
    Scripted { script: PathBuf },
    /// Every document gets the same FDC code and "unknown" elsewhere.
    Uniform { fdc_code: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalQueueConfig {
    /// Worker threads for the model stages.
    pub workers: usize,
    pub orchestrator: OrchestratorConfig,
}

impl Default for LocalQueueConfig {
    fn default() -> Self {
        LocalQueueConfig {
            workers: 4,
            orchestrator: OrchestratorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LanguageMode {
    #[default]
    Trigram,
    /// Skip language identification.
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RulesStage {
    pub min_bytes: usize,
    pub max_garbled_ratio: f64,
    pub target_language: String,
    pub language_detector: LanguageMode,
}

impl Default for RulesStage {
    fn default() -> Self {
        let r = RuleConfig::default();
        RulesStage {
            min_bytes: r.min_bytes,
            max_garbled_ratio: r.max_garbled_ratio,
            target_language: r.target_language,
            language_detector: LanguageMode::default(),
        }
    }
}

impl RulesStage {
    pub fn rules(&self) -> RuleConfig {
        RuleConfig {
            min_bytes: self.min_bytes,
            max_garbled_ratio: self.max_garbled_ratio,
            target_language: self.target_language.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyStage {
    pub labels: LabelConfig,
    pub book_paper: BookPaperConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecontamStage {
    /// Line-delimited `{problem, solution}` records.
    pub benchmark: PathBuf,
    #[serde(default = "default_n")]
    pub n: usize,
}

fn default_n() -> usize {
    crate::decontam::DEFAULT_N
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchgenStage {
    pub generation: BenchgenConfig,
    /// Size of the sampled evaluation set; the whole pool when unset.
    pub eval_size: Option<usize>,
    pub sample_seed: u64,
    /// Option shuffle seed; 0 keeps the generated order.
    pub render_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortraitStage {
    pub group_by: GroupBy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StageSpec {
    Dedup(DedupConfig),
    Rules(RulesStage),
    Classify(ClassifyStage),
    Refine(StageConfig),
    Complete(StageConfig),
    Decontam(DecontamStage),
    Benchgen(BenchgenStage),
    Portrait(PortraitStage),
}

impl StageSpec {
    pub fn name(&self) -> &'static str {
        match self {
            StageSpec::Dedup(_) => "dedup",
            StageSpec::Rules(_) => "rules",
            StageSpec::Classify(_) => "classify",
            StageSpec::Refine(_) => "refine",
            StageSpec::Complete(_) => "complete",
            StageSpec::Decontam(_) => "decontam",
            StageSpec::Benchgen(_) => "benchgen",
            StageSpec::Portrait(_) => "portrait",
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    /// A run of one stage over the output of an earlier run.
    pub fn single(input: PathBuf, output_dir: PathBuf, stage: StageSpec, models: ModelsConfig) -> Self {
        PipelineConfig {
            input,
            keep_input_state: true,
            output_dir,
            tokenizer: TokenizerSpec::whitespace(),
            models,
            queue: LocalQueueConfig::default(),
            stages: vec![stage],
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Reads a config file; relative paths are taken from the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.into(), e.to_string()))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.input);
        resolve(base, &mut self.output_dir);
        let models = [
            self.models.teacher.as_mut(),
            self.models.book_paper.as_mut(),
            self.models.generator.as_mut(),
            self.models.judge.as_mut(),
        ];
        for m in models.into_iter().flatten() {
            if let ModelSpec::Scripted { script } = m {
                resolve(base, script);
            }
        }
        if let Some(LabelerSpec::Scripted { script }) = self.models.labeler.as_mut() {
            resolve(base, script);
        }
        for s in &mut self.stages {
            if let StageSpec::Decontam(d) = s {
                resolve(base, &mut d.benchmark);
            }
        }
    }

    /// Checks everything that can be checked without running a stage.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !self.input.is_file() {
            return bad(format!("input {} does not exist", self.input.display()));
        }
        if self.tokenizer.kind != TokenizerKind::Whitespace {
            return bad(format!("tokenizer {:?} is not available here", self.tokenizer.name));
        }
        if self.stages.is_empty() {
            return bad("no stages".into());
        }
        if self.queue.workers == 0 {
            return bad("queue.workers must be at least 1".into());
        }
        for (i, s) in self.stages.iter().enumerate() {
            let at = |m: String| ConfigError::Invalid(format!("stage {} ({}): {m}", i + 1, s.name()));
            match s {
                StageSpec::Dedup(c) => c.validate().map_err(|e| at(e.to_string()))?,
                StageSpec::Rules(c) => c.rules().validate().map_err(|e| at(e.to_string()))?,
                StageSpec::Classify(c) => {
                    if self.models.labeler.is_none() {
                        return Err(at("needs models.labeler".into()));
                    }
                    if self.models.book_paper.is_none() {
                        return Err(at("needs models.book_paper".into()));
                    }
                    if c.book_paper.max_attempts == 0 {
                        return Err(at("book_paper.max_attempts must be at least 1".into()));
                    }
                }
                StageSpec::Refine(c) | StageSpec::Complete(c) => {
                    if self.models.teacher.is_none() {
                        return Err(at("needs models.teacher".into()));
                    }
                    if c.window == 0 || c.success_percent > 100 || c.concurrency == 0 {
                        return Err(at("window and concurrency must be positive, success_percent at most 100".into()));
                    }
                }
                StageSpec::Decontam(c) => {
                    if c.n == 0 {
                        return Err(at("n must be at least 1".into()));
                    }
                    if !c.benchmark.is_file() {
                        return Err(at(format!("benchmark {} does not exist", c.benchmark.display())));
                    }
                }
                StageSpec::Benchgen(c) => {
                    if self.models.generator.is_none() || self.models.judge.is_none() {
                        return Err(at("needs models.generator and models.judge".into()));
                    }
                    if c.generation.segment_tokens == 0 {
                        return Err(at("segment_tokens must be at least 1".into()));
                    }
                }
                StageSpec::Portrait(_) => {}
            }
        }
        Ok(())
    }
}
