use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::task::*;
use super::{Clock, QueueBackend, QueueError};

/// Queue operations as a worker or producer sees them; the queue side
/// stamps the time.
pub trait TaskQueue: Send + Sync {
    fn enqueue(&self, task: NewTask) -> Result<String, QueueError>;
    fn register(&self, worker_id: &str) -> Result<(), QueueError>;
    fn lease(&self, worker_id: &str) -> Result<Option<LeaseGrant>, QueueError>;
    fn heartbeat(&self, worker_id: &str) -> Result<(), QueueError>;
    fn report(&self, worker_id: &str, task_id: &str, epoch: u64, outcome: Outcome) -> Result<TaskStatus, QueueError>;
    fn reap(&self) -> Result<Vec<Reclaimed>, QueueError>;
    fn stats(&self) -> Result<QueueStats, QueueError>;
}

/// A backend plus a clock, usable in-process.
#[derive(Clone)]
pub struct LocalQueue {
    pub backend: Arc<dyn QueueBackend>,
    pub clock: Arc<dyn Clock>,
}

impl LocalQueue {
    pub fn new(backend: Arc<dyn QueueBackend>, clock: Arc<dyn Clock>) -> Self {
        LocalQueue { backend, clock }
    }
}

impl TaskQueue for LocalQueue {
    fn enqueue(&self, task: NewTask) -> Result<String, QueueError> {
        self.backend.enqueue(task)
    }
    fn register(&self, worker_id: &str) -> Result<(), QueueError> {
        self.backend.register(worker_id, self.clock.now())
    }
    fn lease(&self, worker_id: &str) -> Result<Option<LeaseGrant>, QueueError> {
        self.backend.lease_next(worker_id, self.clock.now())
    }
    fn heartbeat(&self, worker_id: &str) -> Result<(), QueueError> {
        self.backend.heartbeat(worker_id, self.clock.now())
    }
    fn report(&self, worker_id: &str, task_id: &str, epoch: u64, outcome: Outcome) -> Result<TaskStatus, QueueError> {
        self.backend.report(worker_id, task_id, epoch, outcome, self.clock.now())
    }
    fn reap(&self) -> Result<Vec<Reclaimed>, QueueError> {
        Ok(self.backend.reap(self.clock.now()))
    }
    fn stats(&self) -> Result<QueueStats, QueueError> {
        Ok(self.backend.stats())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkerConfig {
    pub heartbeat_interval_ms: u64,
    pub idle_poll_ms: u64,
    /// Stop once nothing is queued or leased.
    pub exit_when_drained: bool,
    pub retry_delay_ms: u64,
    /// Consecutive transport errors tolerated before giving up.
    pub max_transport_errors: u32,
}

impl Default for WorkerConfig {
    fn default() -> Self {
        WorkerConfig {
            heartbeat_interval_ms: 10_000,
            idle_poll_ms: 500,
            exit_when_drained: false,
            retry_delay_ms: 250,
            max_transport_errors: 10,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerSummary {
    pub done: usize,
    pub failed: usize,
    pub stale: usize,
}

fn sleep_ms(ms: u64, stop: &AtomicBool) {
    let mut left = ms;
    while left > 0 && !stop.load(Ordering::Relaxed) {
        let step = left.min(50);
        thread::sleep(Duration::from_millis(step));
        left -= step;
    }
}

/// Lease, run, report until `stop` is set (or the queue drains, if configured).
/// The handler runs while a side thread keeps heartbeating.
pub fn run_worker(
    queue: &dyn TaskQueue,
    worker_id: &str,
    handler: &(dyn Fn(&TaskRecord) -> Outcome + Sync),
    cfg: &WorkerConfig,
    stop: &AtomicBool,
) -> Result<WorkerSummary, QueueError> {
    let mut summary = WorkerSummary::default();
    let mut errors = 0u32;
    let mut registered = false;
    while !stop.load(Ordering::Relaxed) {
        let step = (|| -> Result<bool, QueueError> {
            if !registered {
                queue.register(worker_id)?;
                registered = true;
            }
            queue.heartbeat(worker_id)?;
            let Some(grant) = queue.lease(worker_id)? else {
                if cfg.exit_when_drained && queue.stats()?.drained() {
                    return Ok(false);
                }
                sleep_ms(cfg.idle_poll_ms, stop);
                return Ok(true);
            };
            let finished = AtomicBool::new(false);
            let outcome = thread::scope(|s| {
                s.spawn(|| {
                    while !finished.load(Ordering::Relaxed) {
                        sleep_ms(cfg.heartbeat_interval_ms, &finished);
                        if !finished.load(Ordering::Relaxed) {
                            if let Err(e) = queue.heartbeat(worker_id) {
                                log::warn!("{worker_id}: heartbeat failed: {e}");
                            }
                        }
                    }
                });
                let o = handler(&grant.task);
                finished.store(true, Ordering::Relaxed);
                o
            });
            match queue.report(worker_id, &grant.task.task_id, grant.epoch, outcome) {
                Ok(_) => match outcome {
                    Outcome::Done => summary.done += 1,
                    Outcome::Failed => summary.failed += 1,
                },
                Err(QueueError::StaleLease { .. }) => summary.stale += 1,
                Err(e) => return Err(e),
            }
            Ok(true)
        })();
        match step {
            Ok(true) => errors = 0,
            Ok(false) => break,
            Err(QueueError::WorkerDead(_)) => errors = 0,
            Err(QueueError::UnknownWorker(_)) => registered = false,
            Err(e @ QueueError::Transport(_)) => {
                errors += 1;
                if errors > cfg.max_transport_errors {
                    return Err(e);
                }
                let backoff = cfg.retry_delay_ms.saturating_mul(1 << errors.min(6));
                log::warn!("{worker_id}: {e}; retrying in {backoff} ms");
                sleep_ms(backoff, stop);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(summary)
}

/// Calls `reap` every `period_ms` until `stop` is set.
pub fn run_reaper(queue: &dyn TaskQueue, period_ms: u64, stop: &AtomicBool) {
    while !stop.load(Ordering::Relaxed) {
        sleep_ms(period_ms, stop);
        match queue.reap() {
            Ok(r) if !r.is_empty() => log::info!("reclaimed {} task(s)", r.len()),
            Ok(_) => {}
            Err(e) => log::warn!("reap failed: {e}"),
        }
    }
}
