//! `stratum`: run curation stages, whole pipelines, and the task queue.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use stratum_core::benchgen::BenchgenConfig;
use stratum_core::corpus::{write_documents, GroupBy, Ingestor, WhitespaceTokenizer};
use stratum_core::dedup::DedupConfig;
use stratum_core::filters::{BookPaperConfig, LabelConfig};
use stratum_core::llm_stages::{apply_outcome, run_stage, LlmStage, StageConfig, Verdict};
use stratum_core::orchestrator::{
    run_reaper, run_worker, serve, simulate, InMemoryQueue, LocalQueue, NewTask, OrchestratorConfig, Outcome,
    RemoteQueue, SimConfig, SystemClock, TaskQueue, TaskRecord, WorkerConfig,
};
use stratum_core::pipeline::{
    chat_model, BenchgenStage, ClassifyStage, DecontamStage, LabelerSpec, LanguageMode, ModelSpec,
    ModelsConfig, Pipeline, PipelineConfig, RulesStage, StageSpec,
};
use stratum_core::{Document, Level};

#[derive(Parser)]
#[command(name = "stratum", version, about = "Leveled corpus curation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize raw records into documents (L1).
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Near-duplicate removal.
    Dedup {
        #[command(flatten)]
        io: StageIo,
        #[arg(long, default_value_t = 0.8)]
        threshold: f64,
        /// MinHash seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Size, garbled-text and language rules (L2).
    Filter {
        #[command(flatten)]
        io: StageIo,
        #[arg(long, default_value_t = 8192)]
        min_bytes: usize,
        #[arg(long, default_value_t = 0.5)]
        max_garbled_ratio: f64,
        #[arg(long, default_value = "en")]
        language: String,
        #[arg(long)]
        no_language_detect: bool,
    },
    /// Labels, educational filter and book/paper split (L3).
    Classify {
        #[command(flatten)]
        io: StageIo,
        /// `uniform:CODE` or `scripted:PATH`.
        #[arg(long)]
        labeler: String,
        /// `identity`, `scripted:PATH` or `http:URL`.
        #[arg(long)]
        book_paper: String,
    },
    /// Chunked refinement with the teacher model (L4).
    Refine {
        #[command(flatten)]
        io: StageIo,
        #[command(flatten)]
        llm: LlmArgs,
    },
    /// Chunked completion of papers (L5).
    Complete {
        #[command(flatten)]
        io: StageIo,
        #[command(flatten)]
        llm: LlmArgs,
    },
    /// Drop documents sharing an n-gram with a benchmark.
    Decontam {
        #[command(flatten)]
        io: StageIo,
        #[arg(long)]
        benchmark: PathBuf,
        #[arg(long, default_value_t = 20)]
        n: usize,
    },
    /// Generate, judge, sample and render multiple-choice questions.
    Benchgen {
        #[command(flatten)]
        io: StageIo,
        #[arg(long)]
        generator: String,
        #[arg(long)]
        judge: String,
        #[arg(long)]
        eval_size: Option<usize>,
        #[arg(long, default_value_t = 0)]
        sample_seed: u64,
        /// 0 keeps the generated option order.
        #[arg(long, default_value_t = 0)]
        render_seed: u64,
    },
    /// Token and document shares per group.
    Portrait {
        #[arg(long)]
        input: PathBuf,
        /// `doc_type`, `discipline`, `source` or `label:NAME`.
        #[arg(long, default_value = "discipline")]
        group_by: String,
        #[arg(long)]
        json: bool,
    },
    /// Run a pipeline config.
    Run {
        config: PathBuf,
    },
    /// Host the task queue over TCP.
    QueueServe {
        #[arg(long, default_value = "127.0.0.1:7070")]
        addr: String,
        #[command(flatten)]
        orch: OrchArgs,
        /// Tasks to enqueue at start, one JSON object per line.
        #[arg(long)]
        tasks: Option<PathBuf>,
    },
    /// Add tasks to a running queue.
    Enqueue {
        #[arg(long)]
        addr: String,
        #[arg(long)]
        tasks: PathBuf,
    },
    /// Lease and execute tasks from a queue server.
    Worker {
        #[arg(long)]
        addr: String,
        #[arg(long)]
        id: String,
        #[arg(long, value_enum, default_value_t = Handler::Noop)]
        handler: Handler,
        /// Time a noop task takes.
        #[arg(long, default_value_t = 0)]
        work_ms: u64,
        /// Teacher for refine/complete tasks.
        #[arg(long)]
        teacher: Option<String>,
        #[arg(long, default_value_t = 10_000)]
        heartbeat_ms: u64,
        #[arg(long, default_value_t = 500)]
        idle_poll_ms: u64,
        /// Exit once every task is terminal.
        #[arg(long)]
        exit_when_drained: bool,
    },
    /// Queue metrics from a server, or stage metrics from a run directory.
    Stats {
        #[arg(long, conflicts_with = "run")]
        addr: Option<String>,
        #[arg(long)]
        run: Option<PathBuf>,
    },
    /// Fault-injection simulation of the queue.
    Simulate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Consecutive seeds to run, starting at `--seed`.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, default_value_t = 100)]
        tasks: usize,
        #[arg(long, default_value_t = 3)]
        workers: usize,
    },
}

#[derive(Args)]
struct StageIo {
    /// Documents written by `ingest` or an earlier stage.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output_dir: PathBuf,
    #[arg(long, default_value_t = 4)]
    workers: usize,
}

#[derive(Args)]
struct LlmArgs {
    #[arg(long)]
    teacher: String,
    #[arg(long, default_value_t = 1024)]
    window: usize,
    #[arg(long, default_value_t = 95)]
    success_percent: u32,
}

#[derive(Args)]
struct OrchArgs {
    #[arg(long, default_value_t = 60_000)]
    heartbeat_timeout_ms: u64,
    #[arg(long, default_value_t = 15_000)]
    reap_ms: u64,
    #[arg(long, default_value_t = 3)]
    max_attempts: u32,
}

#[derive(Clone, Copy, ValueEnum)]
enum Handler {
    /// Sleep `--work-ms`, then report done.
    Noop,
    /// Refine or complete the document file named by the task payload.
    Llm,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(anyhow::Error),
    Stage(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Stage(e)
    }
}

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn model_spec(arg: &str) -> Result<ModelSpec, Failure> {
    match arg.split_once(':') {
        _ if arg == "identity" => Ok(ModelSpec::Identity {}),
        Some(("scripted", p)) => Ok(ModelSpec::Scripted { script: p.into() }),
        Some(("http", url)) => Ok(ModelSpec::Http {
            base_url: url.into(),
            token_env: Some("STRATUM_API_TOKEN".into()),
            timeout_secs: 300,
            retry: Default::default(),
        }),
        _ => Err(config_err(anyhow::anyhow!("bad model {arg:?}: use identity, scripted:PATH or http:URL"))),
    }
}

fn labeler_spec(arg: &str) -> Result<LabelerSpec, Failure> {
    match arg.split_once(':') {
        Some(("uniform", code)) => Ok(LabelerSpec::Uniform { fdc_code: code.into() }),
        Some(("scripted", p)) => Ok(LabelerSpec::Scripted { script: p.into() }),
        _ => Err(config_err(anyhow::anyhow!("bad labeler {arg:?}: use uniform:CODE or scripted:PATH"))),
    }
}

fn group_by(arg: &str) -> Result<GroupBy, Failure> {
    Ok(match arg {
        "doc_type" => GroupBy::DocType,
        "discipline" => GroupBy::Discipline,
        "source" => GroupBy::Source,
        _ => match arg.strip_prefix("label:") {
            Some(l) => GroupBy::Label(l.into()),
            None => return Err(config_err(anyhow::anyhow!("bad group {arg:?}"))),
        },
    })
}

fn orchestrator(a: &OrchArgs) -> OrchestratorConfig {
    OrchestratorConfig {
        heartbeat_timeout_ms: a.heartbeat_timeout_ms,
        reap_period_ms: a.reap_ms,
        max_attempts: a.max_attempts,
    }
}

fn print_json(v: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn run_pipeline(cfg: PipelineConfig) -> Result<(), Failure> {
    let pipeline = Pipeline::prepare(cfg).map_err(config_err)?;
    let summary = pipeline.run().map_err(|e| Failure::Stage(e.into()))?;
    log::info!(
        "{} stages ({} executed): {} active, {} dropped, {} failed",
        summary.stages.len(),
        summary.executed,
        summary.documents.active,
        summary.documents.dropped,
        summary.documents.failed
    );
    print_json(&summary)?;
    if !summary.is_balanced() {
        return Err(Failure::Stage(anyhow::anyhow!("stage reports do not balance")));
    }
    Ok(())
}

fn single(io: StageIo, stage: StageSpec, models: ModelsConfig) -> Result<(), Failure> {
    let mut cfg = PipelineConfig::single(io.input, io.output_dir, stage, models);
    cfg.queue.workers = io.workers;
    run_pipeline(cfg)
}

fn read_tasks(path: &Path) -> anyhow::Result<Vec<NewTask>> {
    let f = BufReader::new(File::open(path).with_context(|| format!("open {}", path.display()))?);
    let mut out = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(out)
}

/// Refines or completes one document file in place of a `{payload}.out` file.
fn llm_task(task: &TaskRecord, teacher: &dyn stratum_core::model_client::ChatModel) -> anyhow::Result<Outcome> {
    let stage = match task.kind.as_str() {
        "refine" => LlmStage::L4,
        "complete" => LlmStage::L5,
        k => bail!("no handler for task kind {k:?}"),
    };
    let path = Path::new(&task.payload_ref);
    let mut doc: Document = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let cfg = if stage == LlmStage::L4 { StageConfig::l4() } else { StageConfig::l5() };
    let outcome = run_stage(&doc, stage, teacher, &cfg, &WhitespaceTokenizer)?;
    apply_outcome(&mut doc, &outcome);
    let out = path.with_extension("out.json");
    std::fs::write(&out, serde_json::to_string(&doc)?)?;
    Ok(match outcome.document_verdict {
        Verdict::Success => Outcome::Done,
        Verdict::FailedRequeue => Outcome::Failed,
    })
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Ingest { input, output } => {
            let f = BufReader::new(File::open(&input).with_context(|| format!("open {}", input.display()))?);
            let mut ing = Ingestor::new(f);
            let mut docs = Vec::new();
            for d in ing.by_ref() {
                let mut d = d.context("read input")?;
                d.reach(Level::L1);
                docs.push(d);
            }
            let mut w = BufWriter::new(File::create(&output).with_context(|| format!("create {}", output.display()))?);
            write_documents(&mut w, &docs).context("write documents")?;
            w.flush().context("write documents")?;
            print_json(ing.report())?;
        }
        Command::Dedup { io, threshold, seed } => {
            let mut cfg = DedupConfig {
                verify_threshold: threshold,
                ..Default::default()
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            single(io, StageSpec::Dedup(cfg), ModelsConfig::default())?;
        }
        Command::Filter {
            io,
            min_bytes,
            max_garbled_ratio,
            language,
            no_language_detect,
        } => {
            let rules = RulesStage {
                min_bytes,
                max_garbled_ratio,
                target_language: language,
                language_detector: if no_language_detect { LanguageMode::Off } else { LanguageMode::Trigram },
            };
            single(io, StageSpec::Rules(rules), ModelsConfig::default())?;
        }
        Command::Classify { io, labeler, book_paper } => {
            let models = ModelsConfig {
                labeler: Some(labeler_spec(&labeler)?),
                book_paper: Some(model_spec(&book_paper)?),
                ..Default::default()
            };
            let stage = ClassifyStage {
                labels: LabelConfig::default(),
                book_paper: BookPaperConfig::default(),
            };
            single(io, StageSpec::Classify(stage), models)?;
        }
        Command::Refine { io, llm } => {
            let (cfg, models) = llm_stage(&llm, StageConfig::l4())?;
            single(io, StageSpec::Refine(cfg), models)?;
        }
        Command::Complete { io, llm } => {
            let (cfg, models) = llm_stage(&llm, StageConfig::l5())?;
            single(io, StageSpec::Complete(cfg), models)?;
        }
        Command::Decontam { io, benchmark, n } => {
            single(io, StageSpec::Decontam(DecontamStage { benchmark, n }), ModelsConfig::default())?;
        }
        Command::Benchgen {
            io,
            generator,
            judge,
            eval_size,
            sample_seed,
            render_seed,
        } => {
            let models = ModelsConfig {
                generator: Some(model_spec(&generator)?),
                judge: Some(model_spec(&judge)?),
                ..Default::default()
            };
            let stage = BenchgenStage {
                generation: BenchgenConfig::default(),
                eval_size,
                sample_seed,
                render_seed,
            };
            single(io, StageSpec::Benchgen(stage), models)?;
        }
        Command::Portrait { input, group_by: g, json } => {
            let g = group_by(&g)?;
            let f = BufReader::new(File::open(&input).with_context(|| format!("open {}", input.display()))?);
            let docs: Vec<Document> = Ingestor::resuming(f).collect::<Result<_, _>>().context("read input")?;
            let report = stratum_core::corpus::portrait(docs.iter().filter(|d| d.is_active()), &g, &WhitespaceTokenizer);
            if json {
                print_json(&report)?;
            } else {
                print!("{}", report.to_table());
            }
        }
        Command::Run { config } => {
            let cfg = PipelineConfig::load(&config).map_err(config_err)?;
            run_pipeline(cfg)?;
        }
        Command::QueueServe { addr, orch, tasks } => {
            let cfg = orchestrator(&orch);
            if cfg.max_attempts == 0 || cfg.heartbeat_timeout_ms == 0 {
                return Err(config_err(anyhow::anyhow!("max_attempts and heartbeat timeout must be positive")));
            }
            let initial = match &tasks {
                Some(p) => read_tasks(p).map_err(config_err)?,
                None => Vec::new(),
            };
            let queue: Arc<dyn TaskQueue> = Arc::new(LocalQueue::new(
                Arc::new(InMemoryQueue::new(cfg.clone())),
                Arc::new(SystemClock::new()),
            ));
            for t in initial {
                queue.enqueue(t).context("enqueue")?;
            }
            let listener = TcpListener::bind(&addr).with_context(|| format!("bind {addr}"))?;
            println!("listening {}", listener.local_addr().context("local addr")?);
            std::io::stdout().flush().ok();
            let stop = Arc::new(AtomicBool::new(false));
            let reaper = {
                let (q, s) = (queue.clone(), stop.clone());
                std::thread::spawn(move || run_reaper(q.as_ref(), cfg.reap_period_ms, &s))
            };
            serve(listener, queue, stop.clone()).context("serve")?;
            stop.store(true, std::sync::atomic::Ordering::Relaxed);
            reaper.join().ok();
        }
        Command::Enqueue { addr, tasks } => {
            let tasks = read_tasks(&tasks).map_err(config_err)?;
            let q = RemoteQueue::new(addr);
            for t in tasks {
                q.enqueue(t).context("enqueue")?;
            }
            print_json(&q.stats().context("stats")?)?;
        }
        Command::Worker {
            addr,
            id,
            handler,
            work_ms,
            teacher,
            heartbeat_ms,
            idle_poll_ms,
            exit_when_drained,
        } => {
            let teacher = match (handler, teacher) {
                (Handler::Llm, Some(t)) => Some(chat_model(&model_spec(&t)?).map_err(config_err)?),
                (Handler::Llm, None) => return Err(config_err(anyhow::anyhow!("--handler llm needs --teacher"))),
                _ => None,
            };
            let run = |t: &TaskRecord| -> Outcome {
                match &teacher {
                    None => {
                        std::thread::sleep(Duration::from_millis(work_ms));
                        Outcome::Done
                    }
                    Some(m) => llm_task(t, m.as_ref()).unwrap_or_else(|e| {
                        log::error!("{}: {e:#}", t.task_id);
                        Outcome::Failed
                    }),
                }
            };
            let cfg = WorkerConfig {
                heartbeat_interval_ms: heartbeat_ms,
                idle_poll_ms,
                exit_when_drained,
                ..Default::default()
            };
            let q = RemoteQueue::new(addr);
            let summary = run_worker(&q, &id, &run, &cfg, &AtomicBool::new(false)).context("worker")?;
            print_json(&summary)?;
        }
        Command::Stats { addr, run } => match (addr, run) {
            (Some(a), _) => print_json(&RemoteQueue::new(a).stats().context("stats")?)?,
            (None, Some(dir)) => {
                let p = dir.join("run_summary.json");
                let text = std::fs::read_to_string(&p).with_context(|| format!("read {}", p.display()))?;
                let v: serde_json::Value = serde_json::from_str(&text).context("parse run summary")?;
                print_json(&v)?;
            }
            (None, None) => return Err(config_err(anyhow::anyhow!("give --addr or --run"))),
        },
        Command::Simulate {
            seed,
            seeds,
            tasks,
            workers,
        } => {
            let mut bad = 0;
            for s in seed..seed + seeds {
                let r = simulate(&SimConfig {
                    seed: s,
                    tasks,
                    workers,
                    ..Default::default()
                });
                if !r.ok() {
                    bad += 1;
                }
                println!("{}", serde_json::to_string(&r).context("encode")?);
            }
            if bad > 0 {
                return Err(anyhow::anyhow!("{bad} of {seeds} schedules violated an invariant").into());
            }
        }
    }
    Ok(())
}

fn llm_stage(a: &LlmArgs, base: StageConfig) -> Result<(StageConfig, ModelsConfig), Failure> {
    let cfg = StageConfig {
        window: a.window,
        success_percent: a.success_percent,
        ..base
    };
    let models = ModelsConfig {
        teacher: Some(model_spec(&a.teacher)?),
        ..Default::default()
    };
    Ok((cfg, models))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
