//! Lease-based task queue with heartbeats, orphan reclamation and bounded retries.
//!
//! Producers enqueue tasks with a priority. Workers lease the best queued
//! task, heartbeat while they hold it, and report done or failed. A reaper
//! takes tasks back from workers whose heartbeat is older than the timeout.
//! Every lease carries an epoch, so a worker that was reaped cannot finish a
//! task that has since been handed to someone else.

mod memory;
mod protocol;
mod sim;
mod supervise;
mod task;
mod worker;

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use memory::{InMemoryQueue, QueueBackend};
pub use protocol::{serve, Envelope, RemoteQueue, Reply, Request, PROTOCOL_VERSION};
pub use sim::{simulate, SimConfig, SimReport};
pub use supervise::{supervise_workers, Health, HealthProbe, ProbeError, RestartAction};
pub use task::*;
pub use worker::{run_reaper, run_worker, LocalQueue, TaskQueue, WorkerConfig, WorkerSummary};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrchestratorConfig {
    pub heartbeat_timeout_ms: Millis,
    pub reap_period_ms: Millis,
    pub max_attempts: u32,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        OrchestratorConfig {
            heartbeat_timeout_ms: 60_000,
            reap_period_ms: 15_000,
            max_attempts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum QueueError {
    #[error("task {0} already enqueued")]
    Duplicate(String),
    #[error("unknown worker {0}")]
    UnknownWorker(String),
    #[error("worker {0} is dead; heartbeat first")]
    WorkerDead(String),
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("stale lease: {task_id} is not held by {worker_id}")]
    StaleLease { task_id: String, worker_id: String },
    #[error("transport: {0}")]
    Transport(String),
    #[error("protocol: {0}")]
    Protocol(String),
}

pub trait Clock: Send + Sync {
    fn now(&self) -> Millis;
}

/// Milliseconds since construction.
#[derive(Debug)]
pub struct SystemClock(Instant);

impl SystemClock {
    pub fn new() -> Self {
        SystemClock(Instant::now())
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Millis {
        self.0.elapsed().as_millis() as Millis
    }
}

#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn at(t: Millis) -> Self {
        ManualClock(AtomicU64::new(t))
    }

    pub fn set(&self, t: Millis) {
        self.0.store(t, Ordering::SeqCst);
    }

    pub fn advance(&self, dt: Millis) {
        self.0.fetch_add(dt, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Millis {
        self.0.load(Ordering::SeqCst)
    }
}
