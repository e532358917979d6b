use serde::{Deserialize, Serialize};

/// Milliseconds on the queue's clock.
pub type Millis = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Queued,
    Leased,
    Done,
    FailedPermanent,
}

impl TaskStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, TaskStatus::Done | TaskStatus::FailedPermanent)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lease {
    pub worker_id: String,
    /// Grows by one on every lease of this task; stale reports carry an old value.
    pub epoch: u64,
    pub leased_at: Millis,
    pub last_heartbeat: Millis,
}

/// What a producer submits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewTask {
    pub task_id: String,
    pub kind: String,
    pub payload_ref: String,
    #[serde(default)]
    pub priority: i64,
    /// Overrides the queue default when set.
    #[serde(default)]
    pub max_attempts: Option<u32>,
}

impl NewTask {
    pub fn new(task_id: impl Into<String>, kind: impl Into<String>, payload_ref: impl Into<String>) -> Self {
        NewTask {
            task_id: task_id.into(),
            kind: kind.into(),
            payload_ref: payload_ref.into(),
            priority: 0,
            max_attempts: None,
        }
    }

    pub fn with_priority(mut self, p: i64) -> Self {
        self.priority = p;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: String,
    pub kind: String,
    pub payload_ref: String,
    pub priority: i64,
    pub attempts: u32,
    pub max_attempts: u32,
    pub status: TaskStatus,
    pub lease: Option<Lease>,
}

impl TaskRecord {
    pub fn check(&self) -> Result<(), String> {
        if (self.status == TaskStatus::Leased) != self.lease.is_some() {
            return Err(format!("{}: status {:?} with lease {:?}", self.task_id, self.status, self.lease));
        }
        if self.attempts > self.max_attempts {
            return Err(format!("{}: attempts {} > {}", self.task_id, self.attempts, self.max_attempts));
        }
        if self.status == TaskStatus::FailedPermanent && self.attempts != self.max_attempts {
            return Err(format!("{}: failed_permanent at attempts {}", self.task_id, self.attempts));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkerState {
    Alive,
    Dead,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerRecord {
    pub worker_id: String,
    pub last_heartbeat: Millis,
    pub state: WorkerState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Done,
    Failed,
}

/// A granted lease as seen by the worker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaseGrant {
    pub task: TaskRecord,
    pub epoch: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reclaimed {
    pub task_id: String,
    pub worker_id: String,
    pub heartbeat_age: Millis,
    pub status: TaskStatus,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueStats {
    pub queued: usize,
    pub leased: usize,
    pub done: usize,
    pub failed_permanent: usize,
    pub workers_alive: usize,
    pub workers_dead: usize,
    /// Tasks taken back from dead workers, over the queue's lifetime.
    pub reclaimed: u64,
    pub stale_reports: u64,
}

impl QueueStats {
    pub fn total(&self) -> usize {
        self.queued + self.leased + self.done + self.failed_permanent
    }

    pub fn drained(&self) -> bool {
        self.queued == 0 && self.leased == 0
    }
}
