//! Seeded single-threaded simulation of workers crashing and stalling
//! against an [`InMemoryQueue`], with invariant checks at every step.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::memory::{InMemoryQueue, QueueBackend};
use super::task::*;
use super::{OrchestratorConfig, QueueError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub tasks: usize,
    pub workers: usize,
    pub queue: OrchestratorConfig,
    pub tick_ms: Millis,
    pub heartbeat_every_ms: Millis,
    /// Per worker, per tick.
    pub crash_prob: f64,
    pub freeze_prob: f64,
    pub fail_prob: f64,
    pub max_work_ms: Millis,
    pub max_downtime_ms: Millis,
    pub max_priority: i64,
    pub max_ticks: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            tasks: 100,
            workers: 3,
            queue: OrchestratorConfig::default(),
            tick_ms: 1_000,
            heartbeat_every_ms: 10_000,
            crash_prob: 0.003,
            freeze_prob: 0.003,
            fail_prob: 0.1,
            max_work_ms: 40_000,
            max_downtime_ms: 150_000,
            max_priority: 4,
            max_ticks: 500_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimReport {
    pub seed: u64,
    pub ticks: u64,
    pub done: usize,
    pub failed_permanent: usize,
    pub leases: u64,
    pub crashes: u64,
    pub freezes: u64,
    pub reclaimed: u64,
    pub stale_reports: u64,
    pub violations: Vec<String>,
}

impl SimReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone)]
struct Held {
    task_id: String,
    epoch: u64,
    remaining: Millis,
}

#[derive(Debug, Clone)]
enum Phase {
    Idle,
    Working(Held),
    /// Process gone; comes back under a new id.
    Crashed { until: Millis },
    /// Process stalled; resumes with whatever it held.
    Frozen { until: Millis, held: Option<Held> },
}

struct SimWorker {
    slot: usize,
    generation: u32,
    phase: Phase,
    last_heartbeat: Millis,
}

impl SimWorker {
    fn id(&self) -> String {
        format!("w{}.{}", self.slot, self.generation)
    }
}

pub fn simulate(cfg: &SimConfig) -> SimReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let q = InMemoryQueue::new(cfg.queue.clone());
    let timeout = cfg.queue.heartbeat_timeout_ms;
    let mut rep = SimReport {
        seed: cfg.seed,
        ..Default::default()
    };
    let bad = |rep: &mut SimReport, msg: String| {
        if rep.violations.len() < 20 {
            rep.violations.push(msg);
        }
    };

    for i in 0..cfg.tasks {
        let p = rng.gen_range(0..=cfg.max_priority);
        q.enqueue(NewTask::new(format!("t{i:04}"), "sim", format!("doc{i}")).with_priority(p))
            .expect("fresh ids");
    }
    let mut now: Millis = 0;
    let mut workers: Vec<SimWorker> = (0..cfg.workers)
        .map(|slot| SimWorker {
            slot,
            generation: 0,
            phase: Phase::Idle,
            last_heartbeat: 0,
        })
        .collect();
    for w in &workers {
        q.register(&w.id(), now).expect("register");
    }
    // Independent model: the live grant per task and when its holder last spoke.
    let mut holder: HashMap<String, (String, u64)> = HashMap::new();
    let mut contact: HashMap<String, Millis> = HashMap::new();

    while rep.ticks < cfg.max_ticks {
        rep.ticks += 1;
        now += cfg.tick_ms;

        if now % cfg.queue.reap_period_ms == 0 {
            for r in q.reap(now) {
                let last = contact.get(&r.task_id).copied().unwrap_or(0);
                if now - last <= timeout {
                    bad(&mut rep, format!("t={now}: {} reclaimed {} ms after contact", r.task_id, now - last));
                }
                if holder.remove(&r.task_id).map(|h| h.0) != Some(r.worker_id.clone()) {
                    bad(&mut rep, format!("t={now}: {} reclaimed from non-holder {}", r.task_id, r.worker_id));
                }
            }
        }

        let mut order: Vec<usize> = (0..workers.len()).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        for k in order {
            let w = &mut workers[k];
            match w.phase.clone() {
                Phase::Crashed { until } => {
                    if now >= until {
                        w.generation += 1;
                        q.register(&w.id(), now).expect("register");
                        w.last_heartbeat = now;
                        w.phase = Phase::Idle;
                    }
                    continue;
                }
                Phase::Frozen { until, held } => {
                    if now < until {
                        continue;
                    }
                    q.heartbeat(&w.id(), now).expect("known worker");
                    w.last_heartbeat = now;
                    if let Some(h) = &held {
                        if holder.get(&h.task_id) == Some(&(w.id(), h.epoch)) {
                            contact.insert(h.task_id.clone(), now);
                        }
                    }
                    w.phase = held.map_or(Phase::Idle, Phase::Working);
                    continue;
                }
                _ => {}
            }
            if rng.gen_bool(cfg.crash_prob) {
                rep.crashes += 1;
                w.phase = Phase::Crashed {
                    until: now + rng.gen_range(cfg.tick_ms..=cfg.max_downtime_ms),
                };
                continue;
            }
            if rng.gen_bool(cfg.freeze_prob) {
                rep.freezes += 1;
                let held = match &w.phase {
                    Phase::Working(h) => Some(h.clone()),
                    _ => None,
                };
                w.phase = Phase::Frozen {
                    until: now + rng.gen_range(cfg.tick_ms..=cfg.max_downtime_ms),
                    held,
                };
                continue;
            }
            if now - w.last_heartbeat >= cfg.heartbeat_every_ms {
                q.heartbeat(&w.id(), now).expect("known worker");
                w.last_heartbeat = now;
                for (t, h) in &holder {
                    if h.0 == w.id() {
                        contact.insert(t.clone(), now);
                    }
                }
            }
            match w.phase.clone() {
                Phase::Idle => {
                    let best = q.max_queued_priority();
                    match q.lease_next(&w.id(), now) {
                        Ok(Some(g)) => {
                            rep.leases += 1;
                            if best.is_some_and(|b| g.task.priority < b) {
                                bad(&mut rep, format!("t={now}: leased p={} while p={best:?} queued", g.task.priority));
                            }
                            if let Some(prev) = holder.insert(g.task.task_id.clone(), (w.id(), g.epoch)) {
                                bad(&mut rep, format!("t={now}: {} double-leased ({prev:?})", g.task.task_id));
                            }
                            contact.insert(g.task.task_id.clone(), now);
                            w.phase = Phase::Working(Held {
                                task_id: g.task.task_id,
                                epoch: g.epoch,
                                remaining: rng.gen_range(cfg.tick_ms..=cfg.max_work_ms),
                            });
                        }
                        Ok(None) => {}
                        Err(QueueError::WorkerDead(_)) => {}
                        Err(e) => bad(&mut rep, format!("t={now}: lease error {e}")),
                    }
                }
                Phase::Working(mut h) => {
                    h.remaining = h.remaining.saturating_sub(cfg.tick_ms);
                    if h.remaining > 0 {
                        w.phase = Phase::Working(h);
                        continue;
                    }
                    let outcome = if rng.gen_bool(cfg.fail_prob) {
                        Outcome::Failed
                    } else {
                        Outcome::Done
                    };
                    let mine = holder.get(&h.task_id) == Some(&(w.id(), h.epoch));
                    match q.report(&w.id(), &h.task_id, h.epoch, outcome, now) {
                        Ok(_) if mine => {
                            holder.remove(&h.task_id);
                        }
                        Ok(_) => bad(&mut rep, format!("t={now}: report by non-holder {} accepted", w.id())),
                        Err(QueueError::StaleLease { .. }) if !mine => {}
                        Err(e) => bad(&mut rep, format!("t={now}: report error {e}")),
                    }
                    w.phase = Phase::Idle;
                }
                _ => unreachable!("handled above"),
            }
        }

        if q.stats().drained() {
            break;
        }
    }

    for t in q.snapshot() {
        if let Err(e) = t.check() {
            bad(&mut rep, e);
        }
        match t.status {
            TaskStatus::Done => rep.done += 1,
            TaskStatus::FailedPermanent => rep.failed_permanent += 1,
            s => bad(&mut rep, format!("{} ended {s:?}", t.task_id)),
        }
    }
    let st = q.stats();
    rep.reclaimed = st.reclaimed;
    rep.stale_reports = st.stale_reports;
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let cfg = SimConfig {
            seed: 42,
            ..Default::default()
        };
        assert_eq!(simulate(&cfg), simulate(&cfg));
    }

    #[test]
    fn faults_happen_and_invariants_hold() {
        let mut reclaimed = 0;
        let mut stale = 0;
        for seed in 0..40 {
            let r = simulate(&SimConfig {
                seed,
                ..Default::default()
            });
            assert!(r.ok(), "seed {seed}: {:?}", r.violations);
            assert_eq!(r.done + r.failed_permanent, 100);
            reclaimed += r.reclaimed;
            stale += r.stale_reports;
        }
        assert!(reclaimed > 0 && stale > 0, "{reclaimed} {stale}");
    }

    #[test]
    fn no_faults_no_reclaims() {
        let r = simulate(&SimConfig {
            crash_prob: 0.0,
            freeze_prob: 0.0,
            fail_prob: 0.0,
            ..Default::default()
        });
        assert!(r.ok());
        assert_eq!((r.done, r.reclaimed, r.leases), (100, 0, 100));
    }
}
