use std::sync::Mutex;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ChatModel, ChatReply, ChatRequest, ChatTransport, TransportError};

/// Exponential backoff with seeded jitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackoffPolicy {
    /// Total attempts, including the first.
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub multiplier: f64,
    pub max_delay_ms: u64,
    /// Fractional jitter, applied as `delay * (1 ± jitter)`.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for BackoffPolicy {
    fn default() -> Self {
        BackoffPolicy {
            max_attempts: 4,
            base_delay_ms: 500,
            multiplier: 2.0,
            max_delay_ms: 30_000,
            jitter: 0.2,
            seed: 0,
        }
    }
}

impl BackoffPolicy {
    /// The delays slept before attempts 2..=max_attempts. Same seed, same schedule.
    pub fn schedule(&self) -> Vec<Duration> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.max_attempts.saturating_sub(1))
            .map(|k| {
                let raw = self.base_delay_ms as f64 * self.multiplier.powi(k as i32);
                let capped = raw.min(self.max_delay_ms as f64);
                let j = if self.jitter > 0.0 {
                    rng.gen_range(-self.jitter..=self.jitter)
                } else {
                    0.0
                };
                Duration::from_millis((capped * (1.0 + j)).max(0.0).round() as u64)
            })
            .collect()
    }
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, d: Duration);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct NoSleep;

impl Sleeper for NoSleep {
    fn sleep(&self, _: Duration) {}
}

/// Records requested delays instead of sleeping.
#[derive(Debug, Default)]
pub struct RecordingSleeper {
    slept: Mutex<Vec<Duration>>,
}

impl RecordingSleeper {
    pub fn slept(&self) -> Vec<Duration> {
        self.slept.lock().unwrap().clone()
    }
}

impl Sleeper for RecordingSleeper {
    fn sleep(&self, d: Duration) {
        self.slept.lock().unwrap().push(d);
    }
}

impl<S: Sleeper + ?Sized> Sleeper for std::sync::Arc<S> {
    fn sleep(&self, d: Duration) {
        (**self).sleep(d)
    }
}

/// Wraps a transport with bounded retries on transient failures.
pub struct RetryingClient<T, S = ThreadSleeper> {
    transport: T,
    policy: BackoffPolicy,
    sleeper: S,
}

impl<T: ChatTransport> RetryingClient<T, ThreadSleeper> {
    pub fn new(transport: T, policy: BackoffPolicy) -> Self {
        RetryingClient {
            transport,
            policy,
            sleeper: ThreadSleeper,
        }
    }
}

impl<T: ChatTransport, S: Sleeper> RetryingClient<T, S> {
    pub fn with_sleeper(transport: T, policy: BackoffPolicy, sleeper: S) -> Self {
        RetryingClient {
            transport,
            policy,
            sleeper,
        }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }
}

impl<T: ChatTransport, S: Sleeper> ChatModel for RetryingClient<T, S> {
    fn chat(&self, req: &ChatRequest) -> ChatReply {
        if let Err(e) = req.validate() {
            let mut reply = ChatReply::failed(e);
            reply.attempts = 0;
            return reply;
        }
        let delays = self.policy.schedule();
        let max = self.policy.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=max {
            match self.transport.send(req) {
                Ok(mut reply) => {
                    reply.attempts = attempt;
                    return reply;
                }
                Err(TransportError::Fatal(msg)) => {
                    let mut reply = ChatReply::failed(format!("protocol error: {msg}"));
                    reply.attempts = attempt;
                    return reply;
                }
                Err(TransportError::Transient(msg)) => {
                    log::debug!("transient failure on attempt {attempt}/{max}: {msg}");
                    last = msg;
                    if let Some(d) = delays.get(attempt as usize - 1) {
                        self.sleeper.sleep(*d);
                    }
                }
            }
        }
        let mut reply = ChatReply::failed(format!("retries exhausted: {last}"));
        reply.attempts = max;
        reply
    }
}
