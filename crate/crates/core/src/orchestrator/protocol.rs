//! Line-delimited JSON protocol for the queue service.
//!
//! Each request is one line `{"v": 1, "op": "...", ...}`; each reply is one
//! line `{"v": 1, "ok": <result>}` or `{"v": 1, "error": {"kind": ...}}`.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::task::*;
use super::worker::TaskQueue;
use super::QueueError;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Request {
    Enqueue { task: NewTask },
    Register { worker_id: String },
    Lease { worker_id: String },
    Heartbeat { worker_id: String },
    Report {
        worker_id: String,
        task_id: String,
        epoch: u64,
        outcome: Outcome,
    },
    Reap,
    Stats,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub v: u32,
    #[serde(flatten)]
    pub request: Request,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    pub v: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ok: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<QueueError>,
}

fn to_value<T: Serialize>(r: Result<T, QueueError>) -> Reply {
    match r {
        Ok(v) => Reply {
            v: PROTOCOL_VERSION,
            ok: Some(serde_json::to_value(v).expect("serializable result")),
            error: None,
        },
        Err(e) => Reply {
            v: PROTOCOL_VERSION,
            ok: None,
            error: Some(e),
        },
    }
}

pub fn handle_line(queue: &dyn TaskQueue, line: &str) -> Reply {
    let env: Envelope = match serde_json::from_str(line) {
        Ok(e) => e,
        Err(e) => return to_value::<()>(Err(QueueError::Protocol(e.to_string()))),
    };
    if env.v != PROTOCOL_VERSION {
        return to_value::<()>(Err(QueueError::Protocol(format!(
            "version {} not supported (server speaks {PROTOCOL_VERSION})",
            env.v
        ))));
    }
    match env.request {
        Request::Enqueue { task } => to_value(queue.enqueue(task)),
        Request::Register { worker_id } => to_value(queue.register(&worker_id)),
        Request::Lease { worker_id } => to_value(queue.lease(&worker_id)),
        Request::Heartbeat { worker_id } => to_value(queue.heartbeat(&worker_id)),
        Request::Report {
            worker_id,
            task_id,
            epoch,
            outcome,
        } => to_value(queue.report(&worker_id, &task_id, epoch, outcome)),
        Request::Reap => to_value(queue.reap()),
        Request::Stats => to_value(queue.stats()),
    }
}

fn connection(queue: Arc<dyn TaskQueue>, stream: TcpStream, stop: Arc<AtomicBool>) {
    let _ = stream.set_read_timeout(Some(Duration::from_millis(200)));
    let mut writer = match stream.try_clone() {
        Ok(w) => w,
        Err(_) => return,
    };
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    while !stop.load(Ordering::Relaxed) {
        match reader.read_line(&mut line) {
            Ok(0) => return,
            Ok(_) => {
                if line.ends_with('\n') {
                    let reply = handle_line(queue.as_ref(), line.trim_end());
                    line.clear();
                    let mut out = serde_json::to_vec(&reply).expect("reply serializes");
                    out.push(b'\n');
                    if writer.write_all(&out).is_err() {
                        return;
                    }
                }
            }
            Err(e) if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {}
            Err(_) => return,
        }
    }
}

/// Accepts connections until `stop` is set; one thread per connection.
pub fn serve(listener: TcpListener, queue: Arc<dyn TaskQueue>, stop: Arc<AtomicBool>) -> std::io::Result<()> {
    listener.set_nonblocking(true)?;
    let mut handles = Vec::new();
    while !stop.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, _)) => {
                stream.set_nonblocking(false)?;
                let (q, s) = (Arc::clone(&queue), Arc::clone(&stop));
                handles.push(thread::spawn(move || connection(q, stream, s)));
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(10)),
            Err(e) => return Err(e),
        }
    }
    for h in handles {
        let _ = h.join();
    }
    Ok(())
}

/// Client side; reconnects lazily after a transport error.
pub struct RemoteQueue {
    addr: String,
    conn: Mutex<Option<(BufReader<TcpStream>, TcpStream)>>,
}

impl RemoteQueue {
    pub fn new(addr: impl Into<String>) -> Self {
        RemoteQueue {
            addr: addr.into(),
            conn: Mutex::new(None),
        }
    }

    fn call<T: DeserializeOwned>(&self, request: Request) -> Result<T, QueueError> {
        let transport = |e: std::io::Error| QueueError::Transport(e.to_string());
        let mut guard = self.conn.lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            let addr = self
                .addr
                .to_socket_addrs()
                .map_err(transport)?
                .next()
                .ok_or_else(|| QueueError::Transport(format!("cannot resolve {}", self.addr)))?;
            let s = TcpStream::connect_timeout(&addr, Duration::from_secs(5)).map_err(transport)?;
            let _ = s.set_nodelay(true);
            *guard = Some((BufReader::new(s.try_clone().map_err(transport)?), s));
        }
        let (reader, writer) = guard.as_mut().expect("connected");
        let mut line = serde_json::to_vec(&Envelope {
            v: PROTOCOL_VERSION,
            request,
        })
        .expect("request serializes");
        line.push(b'\n');
        let mut resp = String::new();
        let io = writer.write_all(&line).and_then(|_| reader.read_line(&mut resp));
        match io {
            Ok(0) => {
                *guard = None;
                return Err(QueueError::Transport("connection closed".into()));
            }
            Err(e) => {
                *guard = None;
                return Err(transport(e));
            }
            Ok(_) => {}
        }
        let reply: Reply = serde_json::from_str(&resp).map_err(|e| QueueError::Protocol(e.to_string()))?;
        if let Some(e) = reply.error {
            return Err(e);
        }
        serde_json::from_value(reply.ok.unwrap_or(Value::Null)).map_err(|e| QueueError::Protocol(e.to_string()))
    }
}

impl TaskQueue for RemoteQueue {
    fn enqueue(&self, task: NewTask) -> Result<String, QueueError> {
        self.call(Request::Enqueue { task })
    }
    fn register(&self, worker_id: &str) -> Result<(), QueueError> {
        self.call(Request::Register {
            worker_id: worker_id.into(),
        })
    }
    fn lease(&self, worker_id: &str) -> Result<Option<LeaseGrant>, QueueError> {
        self.call(Request::Lease {
            worker_id: worker_id.into(),
        })
    }
    fn heartbeat(&self, worker_id: &str) -> Result<(), QueueError> {
        self.call(Request::Heartbeat {
            worker_id: worker_id.into(),
        })
    }
    fn report(&self, worker_id: &str, task_id: &str, epoch: u64, outcome: Outcome) -> Result<TaskStatus, QueueError> {
        self.call(Request::Report {
            worker_id: worker_id.into(),
            task_id: task_id.into(),
            epoch,
            outcome,
        })
    }
    fn reap(&self) -> Result<Vec<Reclaimed>, QueueError> {
        self.call(Request::Reap)
    }
    fn stats(&self) -> Result<QueueStats, QueueError> {
        self.call(Request::Stats)
    }
}
