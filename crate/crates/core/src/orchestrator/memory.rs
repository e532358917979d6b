use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Mutex;

use super::task::*;
use super::{OrchestratorConfig, QueueError};

/// Queue operations with an explicit clock.
pub trait QueueBackend: Send + Sync {
    fn enqueue(&self, task: NewTask) -> Result<String, QueueError>;
    /// Adds the worker, or revives it.
    fn register(&self, worker_id: &str, now: Millis) -> Result<(), QueueError>;
    fn lease_next(&self, worker_id: &str, now: Millis) -> Result<Option<LeaseGrant>, QueueError>;
    fn heartbeat(&self, worker_id: &str, now: Millis) -> Result<(), QueueError>;
    fn report(
        &self,
        worker_id: &str,
        task_id: &str,
        epoch: u64,
        outcome: Outcome,
        now: Millis,
    ) -> Result<TaskStatus, QueueError>;
    fn reap(&self, now: Millis) -> Vec<Reclaimed>;
    fn stats(&self) -> QueueStats;
    fn task(&self, task_id: &str) -> Option<TaskRecord>;
}

#[derive(Debug, Default)]
struct State {
    tasks: HashMap<String, TaskRecord>,
    /// Ready entries keyed by (priority, FIFO order). An entry is live only
    /// while its task is queued under the same sequence number.
    ready: BinaryHeap<(i64, Reverse<u64>, String)>,
    ready_seq: HashMap<String, u64>,
    next_seq: u64,
    epochs: HashMap<String, u64>,
    workers: HashMap<String, WorkerRecord>,
    reclaimed: u64,
    stale_reports: u64,
}

impl State {
    fn push_ready(&mut self, id: &str, priority: i64) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.ready.push((priority, Reverse(seq), id.to_string()));
        self.ready_seq.insert(id.to_string(), seq);
    }

    /// Failure path shared by reports and reaping.
    fn retry_or_fail(&mut self, id: &str) -> TaskStatus {
        let t = self.tasks.get_mut(id).expect("known task");
        t.lease = None;
        if t.attempts < t.max_attempts {
            t.attempts += 1;
            t.status = TaskStatus::Queued;
            let p = t.priority;
            self.push_ready(id, p);
            TaskStatus::Queued
        } else {
            t.status = TaskStatus::FailedPermanent;
            TaskStatus::FailedPermanent
        }
    }
}

/// Reference backend: one mutex around the whole state, so every
/// operation is atomic.
#[derive(Debug)]
pub struct InMemoryQueue {
    cfg: OrchestratorConfig,
    state: Mutex<State>,
}

impl InMemoryQueue {
    pub fn new(cfg: OrchestratorConfig) -> Self {
        InMemoryQueue {
            cfg,
            state: Mutex::new(State::default()),
        }
    }

    pub fn config(&self) -> &OrchestratorConfig {
        &self.cfg
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// All task records, sorted by id.
    pub fn snapshot(&self) -> Vec<TaskRecord> {
        let mut v: Vec<TaskRecord> = self.lock().tasks.values().cloned().collect();
        v.sort_by(|a, b| a.task_id.cmp(&b.task_id));
        v
    }

    pub fn workers(&self) -> Vec<WorkerRecord> {
        let mut v: Vec<WorkerRecord> = self.lock().workers.values().cloned().collect();
        v.sort_by(|a, b| a.worker_id.cmp(&b.worker_id));
        v
    }

    /// Highest priority among queued tasks.
    pub fn max_queued_priority(&self) -> Option<i64> {
        let s = self.lock();
        s.tasks.values().filter(|t| t.status == TaskStatus::Queued).map(|t| t.priority).max()
    }

    fn expired(&self, last: Millis, now: Millis) -> bool {
        now.saturating_sub(last) > self.cfg.heartbeat_timeout_ms
    }
}

impl QueueBackend for InMemoryQueue {
    fn enqueue(&self, task: NewTask) -> Result<String, QueueError> {
        let mut s = self.lock();
        if s.tasks.contains_key(&task.task_id) {
            return Err(QueueError::Duplicate(task.task_id));
        }
        let id = task.task_id.clone();
        let rec = TaskRecord {
            task_id: id.clone(),
            kind: task.kind,
            payload_ref: task.payload_ref,
            priority: task.priority,
            attempts: 0,
            max_attempts: task.max_attempts.unwrap_or(self.cfg.max_attempts),
            status: TaskStatus::Queued,
            lease: None,
        };
        s.tasks.insert(id.clone(), rec);
        s.push_ready(&id, task.priority);
        Ok(id)
    }

    fn register(&self, worker_id: &str, now: Millis) -> Result<(), QueueError> {
        let mut s = self.lock();
        s.workers.insert(
            worker_id.to_string(),
            WorkerRecord {
                worker_id: worker_id.to_string(),
                last_heartbeat: now,
                state: WorkerState::Alive,
            },
        );
        Ok(())
    }

    fn lease_next(&self, worker_id: &str, now: Millis) -> Result<Option<LeaseGrant>, QueueError> {
        let mut s = self.lock();
        let w = s
            .workers
            .get(worker_id)
            .ok_or_else(|| QueueError::UnknownWorker(worker_id.into()))?;
        if w.state == WorkerState::Dead || self.expired(w.last_heartbeat, now) {
            return Err(QueueError::WorkerDead(worker_id.into()));
        }
        while let Some((_, Reverse(seq), id)) = s.ready.pop() {
            if s.ready_seq.get(&id) != Some(&seq) {
                continue;
            }
            s.ready_seq.remove(&id);
            let epoch = {
                let e = s.epochs.entry(id.clone()).or_insert(0);
                *e += 1;
                *e
            };
            let t = s.tasks.get_mut(&id).expect("ready task exists");
            debug_assert_eq!(t.status, TaskStatus::Queued);
            t.status = TaskStatus::Leased;
            t.lease = Some(Lease {
                worker_id: worker_id.into(),
                epoch,
                leased_at: now,
                last_heartbeat: now,
            });
            return Ok(Some(LeaseGrant { task: t.clone(), epoch }));
        }
        Ok(None)
    }

    fn heartbeat(&self, worker_id: &str, now: Millis) -> Result<(), QueueError> {
        let mut s = self.lock();
        let w = s
            .workers
            .get_mut(worker_id)
            .ok_or_else(|| QueueError::UnknownWorker(worker_id.into()))?;
        w.last_heartbeat = w.last_heartbeat.max(now);
        w.state = WorkerState::Alive;
        for t in s.tasks.values_mut() {
            if let Some(l) = t.lease.as_mut().filter(|l| l.worker_id == worker_id) {
                l.last_heartbeat = l.last_heartbeat.max(now);
            }
        }
        Ok(())
    }

    fn report(
        &self,
        worker_id: &str,
        task_id: &str,
        epoch: u64,
        outcome: Outcome,
        _now: Millis,
    ) -> Result<TaskStatus, QueueError> {
        let mut s = self.lock();
        let t = s
            .tasks
            .get(task_id)
            .ok_or_else(|| QueueError::UnknownTask(task_id.into()))?;
        let current = t
            .lease
            .as_ref()
            .is_some_and(|l| l.worker_id == worker_id && l.epoch == epoch);
        if !current {
            s.stale_reports += 1;
            return Err(QueueError::StaleLease {
                task_id: task_id.into(),
                worker_id: worker_id.into(),
            });
        }
        match outcome {
            Outcome::Done => {
                let t = s.tasks.get_mut(task_id).expect("checked");
                t.lease = None;
                t.status = TaskStatus::Done;
                Ok(TaskStatus::Done)
            }
            Outcome::Failed => Ok(s.retry_or_fail(task_id)),
        }
    }

    fn reap(&self, now: Millis) -> Vec<Reclaimed> {
        let mut s = self.lock();
        let timeout = self.cfg.heartbeat_timeout_ms;
        for w in s.workers.values_mut() {
            if now.saturating_sub(w.last_heartbeat) > timeout {
                w.state = WorkerState::Dead;
            }
        }
        let mut orphans: Vec<(String, String, Millis)> = s
            .tasks
            .values()
            .filter_map(|t| {
                let l = t.lease.as_ref()?;
                let age = now.saturating_sub(l.last_heartbeat);
                (age > timeout).then(|| (t.task_id.clone(), l.worker_id.clone(), age))
            })
            .collect();
        orphans.sort();
        let mut out = Vec::with_capacity(orphans.len());
        for (task_id, worker_id, heartbeat_age) in orphans {
            let status = s.retry_or_fail(&task_id);
            s.reclaimed += 1;
            out.push(Reclaimed {
                task_id,
                worker_id,
                heartbeat_age,
                status,
            });
        }
        out
    }

    fn stats(&self) -> QueueStats {
        let s = self.lock();
        let mut st = QueueStats {
            reclaimed: s.reclaimed,
            stale_reports: s.stale_reports,
            ..Default::default()
        };
        for t in s.tasks.values() {
            match t.status {
                TaskStatus::Queued => st.queued += 1,
                TaskStatus::Leased => st.leased += 1,
                TaskStatus::Done => st.done += 1,
                TaskStatus::FailedPermanent => st.failed_permanent += 1,
            }
        }
        for w in s.workers.values() {
            match w.state {
                WorkerState::Alive => st.workers_alive += 1,
                WorkerState::Dead => st.workers_dead += 1,
            }
        }
        st
    }

    fn task(&self, task_id: &str) -> Option<TaskRecord> {
        self.lock().tasks.get(task_id).cloned()
    }
}
