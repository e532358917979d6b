use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Health {
    Healthy,
    Crashed,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("probe failed for {worker_id}: {message}")]
pub struct ProbeError {
    pub worker_id: String,
    pub message: String,
}

/// Reports whether a worker's model backend is up.
pub trait HealthProbe {
    fn probe(&self, worker_id: &str) -> Result<Health, ProbeError>;
}

impl<F: Fn(&str) -> Result<Health, ProbeError>> HealthProbe for F {
    fn probe(&self, worker_id: &str) -> Result<Health, ProbeError> {
        self(worker_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestartAction {
    pub worker_id: String,
}

/// Restart actions for crashed backends. Leases are left alone; reclaiming
/// work is the reaper's job. Probe errors are logged and skipped.
pub fn supervise_workers(probe: &dyn HealthProbe, workers: &[String]) -> Vec<RestartAction> {
    let mut out = Vec::new();
    for w in workers {
        match probe.probe(w) {
            Ok(Health::Crashed) => out.push(RestartAction { worker_id: w.clone() }),
            Ok(Health::Healthy) => {}
            Err(e) => log::warn!("{e}"),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::*;

    #[test]
    fn actions() {
        let probe = |w: &str| match w {
            "a" => Ok(Health::Crashed),
            "b" => Ok(Health::Healthy),
            _ => Err(ProbeError {
                worker_id: w.into(),
                message: "no route".into(),
            }),
        };
        let ws: Vec<String> = ["a", "b", "c"].map(String::from).into();
        assert_eq!(supervise_workers(&probe, &ws), vec![RestartAction { worker_id: "a".into() }]);
    }

    #[test]
    fn restart_within_window_keeps_lease() {
        let q = InMemoryQueue::new(OrchestratorConfig::default());
        q.enqueue(NewTask::new("t", "k", "x")).unwrap();
        q.register("w", 0).unwrap();
        let g = q.lease_next("w", 0).unwrap().unwrap();
        let crashed = |_: &str| Ok(Health::Crashed);
        assert_eq!(supervise_workers(&crashed, &["w".into()]).len(), 1);
        assert_eq!(q.task("t").unwrap().status, TaskStatus::Leased);
        // Backend back after 40 s; the worker process kept heartbeating.
        q.heartbeat("w", 40_000).unwrap();
        assert!(q.reap(90_000).is_empty());
        assert_eq!(q.report("w", "t", g.epoch, Outcome::Done, 90_000), Ok(TaskStatus::Done));
        assert_eq!(q.stats().reclaimed, 0);
    }
}
