use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::benchgen::{build_pool, render, sample_eval_set, write_jsonl};
use crate::corpus::{
    portrait, write_documents, Document, Ingestor, Level, StageOutput, StageReport, Status, Tokenizer,
    WhitespaceTokenizer,
};
use crate::decontam::{decontaminate, read_samples, NGramIndex};
use crate::dedup::dedup;
use crate::filters::{
    apply_verdict, classify_book_paper, complete_l3, label_stage, rule_stage, Detection, DisciplineMap,
    TrigramDetector,
};
use crate::ledger::{Ledger, LedgerEntry, LedgerError};
use crate::llm_stages::{apply_outcome, check_preconditions, run_stage, LlmStage, StageConfig, StageOutcome};
use crate::model_client::ChatModel;
use crate::orchestrator::{
    run_worker, InMemoryQueue, LocalQueue, NewTask, Outcome, SystemClock, TaskQueue, TaskRecord, WorkerConfig,
};

use super::config::*;
use super::models::Models;
use super::{ConfigError, RunError};

pub const LEDGER_FILE: &str = "ledger.jsonl";
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.toml";
const STAGE_DONE: &str = "pipeline";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub index: usize,
    pub name: String,
    pub report: StageReport,
    #[serde(default)]
    pub extra: Value,
    #[serde(default)]
    pub resumed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalCounts {
    pub total: usize,
    pub active: usize,
    pub dropped: usize,
    pub failed: usize,
}

impl FinalCounts {
    fn of(docs: &[Document]) -> Self {
        let mut c = FinalCounts {
            total: docs.len(),
            ..Default::default()
        };
        for d in docs {
            match d.status() {
                Status::Active => c.active += 1,
                Status::Dropped(_) => c.dropped += 1,
                Status::Failed(_) => c.failed += 1,
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub input_documents: usize,
    pub skipped_records: usize,
    pub stages: Vec<StageSummary>,
    /// Stages that ran this time, as opposed to being read back.
    pub executed: usize,
    pub documents: FinalCounts,
}

impl RunSummary {
    pub fn is_balanced(&self) -> bool {
        let c = &self.documents;
        self.stages.iter().all(|s| s.report.is_balanced())
            && c.total == c.active + c.dropped + c.failed
            && c.total == self.input_documents
    }
}

pub struct Pipeline {
    cfg: PipelineConfig,
    models: Models,
    tokenizer: Arc<dyn Tokenizer>,
}

fn stage_key(i: usize, name: &str) -> String {
    format!("{:02}_{name}", i + 1)
}

fn write_atomic(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        f(&mut w)?;
        w.flush()?;
        w.get_ref().sync_all()?;
    }
    std::fs::rename(tmp, path)
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> std::io::Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, v)?;
        w.write_all(b"\n")
    })
}

fn read_documents(path: &Path, resuming: bool) -> Result<(Vec<Document>, usize), RunError> {
    let f = BufReader::new(File::open(path).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?);
    let mut ing = if resuming { Ingestor::resuming(f) } else { Ingestor::new(f) };
    let docs = ing.by_ref().collect::<Result<Vec<_>, _>>().map_err(|e| RunError::Io(e.to_string()))?;
    Ok((docs, ing.report().skipped))
}

fn stage_err(stage: &str, msg: impl ToString) -> RunError {
    RunError::Stage {
        stage: stage.into(),
        msg: msg.to_string(),
    }
}

impl Pipeline {
    /// Validates the config and builds its backends. Nothing is written.
    pub fn prepare(cfg: PipelineConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let resolved = cfg.output_dir.join(RESOLVED_CONFIG_FILE);
        if resolved.exists() {
            let prev = std::fs::read_to_string(&resolved).map_err(|e| ConfigError::Io(resolved.clone(), e.to_string()))?;
            if prev != cfg.resolved_text() {
                return Err(ConfigError::Changed(cfg.output_dir.clone()));
            }
        }
        let models = Models::build(&cfg.models)?;
        Ok(Pipeline {
            cfg,
            models,
            tokenizer: Arc::new(WhitespaceTokenizer),
        })
    }

    /// Replaces the configured backends, e.g. with in-process test doubles.
    pub fn with_models(mut self, models: Models) -> Self {
        self.models = models;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    fn stages_dir(&self) -> PathBuf {
        self.cfg.output_dir.join("stages")
    }

    fn doc_path(&self, key: &str) -> PathBuf {
        self.stages_dir().join(format!("{key}.jsonl"))
    }

    pub fn run(&self) -> Result<RunSummary, RunError> {
        let out = &self.cfg.output_dir;
        std::fs::create_dir_all(self.stages_dir())?;
        let resolved = out.join(RESOLVED_CONFIG_FILE);
        if !resolved.exists() {
            std::fs::write(&resolved, self.cfg.resolved_text())?;
        }
        let ledger = Ledger::open(&out.join(LEDGER_FILE))?;

        let (mut input_docs, skipped) = read_documents(&self.cfg.input, self.cfg.keep_input_state)?;
        let input_documents = input_docs.len();
        for d in &mut input_docs {
            d.reach(Level::L1);
        }

        let keys: Vec<String> = self.cfg.stages.iter().enumerate().map(|(i, s)| stage_key(i, s.name())).collect();
        let done = keys.iter().take_while(|k| ledger.contains(k, STAGE_DONE)).count();
        let mut summaries = Vec::new();
        for k in &keys[..done] {
            let e = ledger.get(k, STAGE_DONE).expect("checked");
            let mut s: StageSummary = serde_json::from_value(e.detail).map_err(|e| stage_err(k, e))?;
            s.resumed = true;
            summaries.push(s);
        }
        let mut docs = if done == 0 {
            input_docs
        } else {
            read_documents(&self.doc_path(&keys[done - 1]), true)?.0
        };

        for (i, spec) in self.cfg.stages.iter().enumerate().skip(done) {
            let key = &keys[i];
            log::info!("stage {key}");
            let (output, extra) = self.run_one(spec, key, docs, &ledger)?;
            let summary = StageSummary {
                index: i + 1,
                name: spec.name().into(),
                report: output.report,
                extra,
                resumed: false,
            };
            if !summary.report.is_balanced() {
                return Err(stage_err(key, "report does not balance"));
            }
            docs = output.documents;
            write_atomic(&self.doc_path(key), |w| write_documents(w, &docs))?;
            write_json(&self.stages_dir().join(format!("{key}.report.json")), &summary)?;
            ledger.record(LedgerEntry::new(key.clone(), STAGE_DONE, serde_json::to_value(&summary).expect("summary")))?;
            summaries.push(summary);
        }

        let summary = RunSummary {
            input_documents,
            skipped_records: skipped,
            executed: keys.len() - done,
            stages: summaries,
            documents: FinalCounts::of(&docs),
        };
        if summary.executed > 0 {
            write_atomic(&out.join("documents.jsonl"), |w| write_documents(w, &docs))?;
            write_json(&out.join("run_summary.json"), &summary)?;
        }
        Ok(summary)
    }

    fn run_one(
        &self,
        spec: &StageSpec,
        key: &str,
        docs: Vec<Document>,
        ledger: &Ledger,
    ) -> Result<(StageOutput, Value), RunError> {
        let tok = self.tokenizer.as_ref();
        let to_value = |v: &dyn erased::Ser| v.value();
        match spec {
            StageSpec::Dedup(c) => {
                let (o, r) = dedup(docs, c).map_err(|e| stage_err(key, e))?;
                Ok((o, to_value(&r)))
            }
            StageSpec::Rules(c) => {
                let rules = c.rules();
                let (o, r) = match c.language_detector {
                    LanguageMode::Trigram => rule_stage(docs, &rules, &TrigramDetector::reference()),
                    LanguageMode::Off => {
                        let target = rules.target_language.clone();
                        let pass = move |_: &str| {
                            Ok(Detection {
                                code: target.clone(),
                                confidence: 1.0,
                            })
                        };
                        rule_stage(docs, &rules, &pass)
                    }
                }
                .map_err(|e| stage_err(key, e))?;
                Ok((o, to_value(&r)))
            }
            StageSpec::Classify(c) => self.classify(c, docs),
            StageSpec::Refine(c) => self.llm(LlmStage::L4, c, key, docs, ledger),
            StageSpec::Complete(c) => self.llm(LlmStage::L5, c, key, docs, ledger),
            StageSpec::Decontam(c) => {
                let f = File::open(&c.benchmark).map_err(|e| stage_err(key, e))?;
                let samples = read_samples(BufReader::new(f)).map_err(|e| stage_err(key, e))?;
                let idx = NGramIndex::build(&samples, c.n, tok).map_err(|e| stage_err(key, e))?;
                let (o, r) = decontaminate(docs, &idx, tok);
                let mut v = to_value(&r);
                v["samples"] = samples.len().into();
                v["grams"] = idx.len().into();
                Ok((o, v))
            }
            StageSpec::Benchgen(c) => self.benchgen(c, key, docs),
            StageSpec::Portrait(c) => {
                let p = portrait(docs.iter().filter(|d| d.is_active()), &c.group_by, tok);
                std::fs::write(self.cfg.output_dir.join(format!("{key}.txt")), p.to_table())?;
                Ok((pass_through(key, docs), to_value(&p)))
            }
        }
    }

    fn classify(&self, c: &ClassifyStage, docs: Vec<Document>) -> Result<(StageOutput, Value), RunError> {
        let labeler = self.models.labeler.as_ref().expect("validated");
        let bp = self.models.book_paper.as_ref().expect("validated");
        let entering: Vec<bool> = docs.iter().map(Document::is_active).collect();
        let (out, label_report) = label_stage(docs, labeler.as_ref(), &c.labels, &DisciplineMap::packaged());
        let mut docs = out.documents;
        let verdicts: Vec<_> = docs
            .par_iter()
            .map(|d| d.is_active().then(|| classify_book_paper(d, bp.as_ref(), &c.book_paper)))
            .collect();
        let mut types: BTreeMap<String, usize> = BTreeMap::new();
        for (d, v) in docs.iter_mut().zip(verdicts) {
            if let Some(v) = v {
                apply_verdict(d, &v);
                complete_l3(d);
                if d.is_active() {
                    *types.entry(d.doc_type.as_str().into()).or_default() += 1;
                }
            }
        }
        let mut report = StageReport::new("classify");
        for (d, e) in docs.iter().zip(entering) {
            if e {
                report.record(d);
            }
        }
        let extra = json!({ "labels": label_report, "doc_types": types });
        Ok((StageOutput { documents: docs, report }, extra))
    }

    fn llm(
        &self,
        stage: LlmStage,
        cfg: &StageConfig,
        key: &str,
        mut docs: Vec<Document>,
        ledger: &Ledger,
    ) -> Result<(StageOutput, Value), RunError> {
        let client: Arc<dyn ChatModel> = self.models.teacher.clone().expect("validated");
        let entering: Vec<usize> = (0..docs.len()).filter(|&i| docs[i].is_active()).collect();
        let eligible: Vec<usize> = entering
            .iter()
            .copied()
            .filter(|&i| check_preconditions(&docs[i], stage).is_ok())
            .collect();
        let mut outcomes: HashMap<String, StageOutcome> = HashMap::new();
        for &i in &eligible {
            if let Some(e) = ledger.get(&docs[i].id, key) {
                let o = serde_json::from_value(e.detail).map_err(|e| stage_err(key, e))?;
                outcomes.insert(docs[i].id.clone(), o);
            }
        }
        let resumed = outcomes.len();
        let pending: Vec<usize> = eligible.iter().copied().filter(|&i| !outcomes.contains_key(&docs[i].id)).collect();

        let mut queue_stats = Value::Null;
        if !pending.is_empty() {
            let backend = Arc::new(InMemoryQueue::new(self.cfg.queue.orchestrator.clone()));
            let queue = LocalQueue::new(backend, Arc::new(SystemClock::new()));
            for &i in &pending {
                queue
                    .enqueue(NewTask::new(docs[i].id.clone(), key, i.to_string()))
                    .map_err(|e| stage_err(key, e))?;
            }
            let results = Mutex::new(HashMap::new());
            let shared: &[Document] = &docs;
            let tok = self.tokenizer.as_ref();
            let handler = |t: &TaskRecord| -> Outcome {
                let Ok(i) = t.payload_ref.parse::<usize>() else {
                    return Outcome::Failed;
                };
                match run_stage(&shared[i], stage, client.as_ref(), cfg, tok) {
                    Ok(o) => {
                        let entry = LedgerEntry::new(o.doc_id.clone(), key, serde_json::to_value(&o).expect("outcome"));
                        match ledger.record(entry) {
                            Ok(()) | Err(LedgerError::Duplicate { .. }) => {
                                results.lock().unwrap_or_else(|p| p.into_inner()).insert(o.doc_id.clone(), o);
                                Outcome::Done
                            }
                            Err(e) => {
                                log::error!("{}: {e}", t.task_id);
                                Outcome::Failed
                            }
                        }
                    }
                    Err(e) => {
                        log::error!("{}: {e}", t.task_id);
                        Outcome::Failed
                    }
                }
            };
            let wcfg = WorkerConfig {
                heartbeat_interval_ms: (self.cfg.queue.orchestrator.heartbeat_timeout_ms / 4).max(1),
                idle_poll_ms: 5,
                exit_when_drained: true,
                ..Default::default()
            };
            let stop = AtomicBool::new(false);
            let n = self.cfg.queue.workers.min(pending.len());
            let worker_results: Vec<_> = std::thread::scope(|s| {
                let hs: Vec<_> = (0..n)
                    .map(|k| {
                        let (q, h, w, st) = (&queue, &handler, &wcfg, &stop);
                        s.spawn(move || run_worker(q, &format!("{key}-w{k}"), h, w, st))
                    })
                    .collect();
                hs.into_iter().map(|h| h.join().expect("worker thread")).collect()
            });
            for r in worker_results {
                r.map_err(|e| stage_err(key, e))?;
            }
            queue_stats = serde_json::to_value(queue.stats().map_err(|e| stage_err(key, e))?).expect("stats");
            outcomes.extend(results.into_inner().unwrap_or_else(|p| p.into_inner()));
        }

        let mut chunks = (0usize, 0usize);
        let mut chunk_failures: BTreeMap<String, usize> = BTreeMap::new();
        for &i in &eligible {
            match outcomes.get(&docs[i].id) {
                Some(o) => {
                    chunks.0 += o.total_chunks;
                    chunks.1 += o.cleaned_chunks;
                    for (f, n) in &o.failures {
                        *chunk_failures.entry(f.as_str().into()).or_default() += n;
                    }
                    apply_outcome(&mut docs[i], o);
                }
                None => docs[i].fail_with("task_failed"),
            }
        }
        let mut report = StageReport::new(key);
        for &i in &entering {
            report.record(&docs[i]);
        }
        let extra = json!({
            "eligible": eligible.len(),
            "not_eligible": entering.len() - eligible.len(),
            "resumed": resumed,
            "executed": pending.len(),
            "chunks_total": chunks.0,
            "chunks_cleaned": chunks.1,
            "chunk_failures": chunk_failures,
            "queue": queue_stats,
        });
        Ok((StageOutput { documents: docs, report }, extra))
    }

    fn benchgen(&self, c: &BenchgenStage, key: &str, docs: Vec<Document>) -> Result<(StageOutput, Value), RunError> {
        let generator = self.models.generator.as_ref().expect("validated");
        let judge = self.models.judge.as_ref().expect("validated");
        let (pool, report) = build_pool(&docs, generator.as_ref(), judge.as_ref(), &c.generation, self.tokenizer.as_ref());
        let k = c.eval_size.unwrap_or(pool.len());
        let eval = sample_eval_set(&pool, k, c.sample_seed).map_err(|e| stage_err(key, e))?;
        let mut rng = ChaCha8Rng::seed_from_u64(c.render_seed);
        let rendered: Vec<_> = eval
            .iter()
            .map(|it| {
                let seed = if c.render_seed == 0 { 0 } else { rng.gen::<u64>().max(1) };
                render(it, seed)
            })
            .collect();
        let dir = self.cfg.output_dir.join("benchgen");
        std::fs::create_dir_all(&dir)?;
        write_atomic(&dir.join("mcq_pool.jsonl"), |w| write_jsonl(&pool, w))?;
        write_atomic(&dir.join("eval_set.jsonl"), |w| write_jsonl(&eval, w))?;
        write_atomic(&dir.join("eval_rendered.jsonl"), |w| write_jsonl(&rendered, w))?;
        let mut v = serde_json::to_value(&report).expect("report");
        v["eval_size"] = eval.len().into();
        Ok((pass_through(key, docs), v))
    }
}

fn pass_through(key: &str, docs: Vec<Document>) -> StageOutput {
    let mut report = StageReport::new(key);
    for d in docs.iter().filter(|d| d.is_active()) {
        report.record(d);
    }
    StageOutput { documents: docs, report }
}

mod erased {
    pub trait Ser {
        fn value(&self) -> serde_json::Value;
    }

    impl<T: serde::Serialize> Ser for T {
        fn value(&self) -> serde_json::Value {
            serde_json::to_value(self).expect("report serializes")
        }
    }
}

impl PipelineConfig {
    /// The config as recorded next to the outputs.
    pub fn resolved_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
