//! Host side of the line-delimited JSON subprocess protocol.
//!
//! Requests (one JSON document per line on the adapter's stdin):
//!
//! ```text
//! {"id":1,"op":"meta"}
//! {"id":2,"op":"predict_proba","instances":[[5.1,3.5,1.4,0.2]]}
//! ```
//!
//! Responses (one per line on stdout, same order):
//!
//! ```text
//! {"id":1,"class_order":["a","b"],"feature_count":4}
//! {"id":2,"probabilities":[[0.9,0.1]]}
//! {"id":2,"error":"..."}
//! ```
//!
//! Missing values travel as `null`. Requests are serialised through a mutex,
//! so one adapter process serves any number of concurrent callers.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::Classifier;
use crate::dataset::Instance;
use crate::error::{Error, Result};

/// Maximum instances per `predict_proba` request.
pub const BRIDGE_BATCH_SIZE: usize = 512;

const STDERR_TAIL_LINES: usize = 20;

#[derive(Debug, Clone)]
pub struct BridgeOptions {
    pub timeout: Duration,
    pub batch_size: usize,
}

impl Default for BridgeOptions {
    fn default() -> Self {
        BridgeOptions {
            timeout: Duration::from_secs(60),
            batch_size: BRIDGE_BATCH_SIZE,
        }
    }
}

#[derive(Serialize)]
struct Request<'a> {
    id: i64,
    op: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    instances: Option<&'a [Instance]>,
}

#[derive(Deserialize)]
struct Response {
    id: i64,
    #[serde(default)]
    probabilities: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    class_order: Option<Vec<Json>>,
    #[serde(default)]
    feature_count: Option<usize>,
    #[serde(default)]
    error: Option<String>,
}

struct Session {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    next_id: i64,
    dead: bool,
}

pub struct BridgeClient {
    command: Vec<String>,
    options: BridgeOptions,
    class_order: Vec<String>,
    feature_count: usize,
    session: Mutex<Session>,
    stderr_tail: Arc<Mutex<VecDeque<String>>>,
}

impl std::fmt::Debug for BridgeClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BridgeClient")
            .field("command", &self.command)
            .field("class_order", &self.class_order)
            .finish()
    }
}

fn json_to_label(v: &Json) -> String {
    match v {
        Json::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl BridgeClient {
    /// Launches `command[0] command[1..]` and performs the `meta` exchange.
    pub fn spawn(command: &[String], options: BridgeOptions) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::Config("empty bridge command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Transport {
                request_id: 0,
                message: format!("cannot start {program:?}: {e}"),
                stderr_tail: String::new(),
            })?;

        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let stderr_tail = Arc::new(Mutex::new(VecDeque::new()));
        let stderr = child.stderr.take().expect("piped stderr");
        let tail = Arc::clone(&stderr_tail);
        thread::spawn(move || drain_stderr(stderr, tail));

        let stdin = child.stdin.take();
        let mut client = BridgeClient {
            command: command.to_vec(),
            options,
            class_order: Vec::new(),
            feature_count: 0,
            session: Mutex::new(Session {
                child,
                stdin,
                lines: rx,
                next_id: 1,
                dead: false,
            }),
            stderr_tail,
        };
        let meta = client.exchange("meta", None)?;
        client.class_order = meta
            .class_order
            .ok_or_else(|| client.transport(meta.id, "meta response lacks class_order"))?
            .iter()
            .map(json_to_label)
            .collect();
        client.feature_count = meta
            .feature_count
            .ok_or_else(|| client.transport(meta.id, "meta response lacks feature_count"))?;
        if client.class_order.is_empty() {
            return Err(client.transport(meta.id, "adapter reported no classes"));
        }
        Ok(client)
    }

    fn stderr_text(&self) -> String {
        let tail = self.stderr_tail.lock().expect("stderr lock");
        tail.iter().cloned().collect::<Vec<_>>().join("\n")
    }

    fn transport(&self, request_id: i64, message: impl Into<String>) -> Error {
        Error::Transport {
            request_id,
            message: message.into(),
            stderr_tail: self.stderr_text(),
        }
    }

    fn exchange(&self, op: &str, instances: Option<&[Instance]>) -> Result<Response> {
        let mut session = self.session.lock().expect("bridge session lock");
        let id = session.next_id;
        session.next_id += 1;
        if session.dead {
            return Err(self.transport(id, "adapter process is no longer running"));
        }
        let line = serde_json::to_string(&Request { id, op, instances })?;
        let write = session.stdin.as_mut().map(|stdin| {
            stdin
                .write_all(line.as_bytes())
                .and_then(|_| stdin.write_all(b"\n"))
                .and_then(|_| stdin.flush())
        });
        if let Some(Err(e)) = write {
            session.dead = true;
            // give the stderr reader a moment to collect the crash output
            thread::sleep(Duration::from_millis(50));
            return Err(self.transport(id, format!("write failed: {e}")));
        }
        let reply = match session.lines.recv_timeout(self.options.timeout) {
            Ok(Ok(l)) => l,
            Ok(Err(e)) => {
                session.dead = true;
                return Err(self.transport(id, format!("read failed: {e}")));
            }
            Err(RecvTimeoutError::Timeout) => {
                session.dead = true;
                let _ = session.child.kill();
                return Err(self.transport(
                    id,
                    format!(
                        "no response within {:?}; adapter killed",
                        self.options.timeout
                    ),
                ));
            }
            Err(RecvTimeoutError::Disconnected) => {
                session.dead = true;
                let status = session.child.wait().ok();
                thread::sleep(Duration::from_millis(50));
                return Err(
                    self.transport(id, format!("adapter exited ({status:?}) before answering"))
                );
            }
        };
        let resp: Response = serde_json::from_str(&reply)
            .map_err(|e| self.transport(id, format!("malformed response {reply:?}: {e}")))?;
        if let Some(message) = resp.error {
            return Err(Error::Adapter {
                request_id: resp.id,
                message,
            });
        }
        if resp.id != id {
            return Err(self.transport(id, format!("response id {} does not match", resp.id)));
        }
        Ok(resp)
    }

    pub fn command(&self) -> &[String] {
        &self.command
    }
}

fn drain_stderr(stderr: impl Read, tail: Arc<Mutex<VecDeque<String>>>) {
    for line in BufReader::new(stderr).lines() {
        let Ok(line) = line else { break };
        let mut t = tail.lock().expect("stderr lock");
        if t.len() == STDERR_TAIL_LINES {
            t.pop_front();
        }
        t.push_back(line);
    }
}

impl Classifier for BridgeClient {
    fn class_order(&self) -> &[String] {
        &self.class_order
    }

    fn feature_count(&self) -> usize {
        self.feature_count
    }

    fn predict_proba_raw(&self, instances: &[Instance]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(instances.len());
        for batch in instances.chunks(self.options.batch_size.max(1)) {
            let resp = self.exchange("predict_proba", Some(batch))?;
            let probs = resp
                .probabilities
                .ok_or_else(|| self.transport(resp.id, "response lacks probabilities"))?;
            if probs.len() != batch.len() {
                return Err(self.transport(
                    resp.id,
                    format!("{} vectors for {} instances", probs.len(), batch.len()),
                ));
            }
            for row in &probs {
                super::check_probabilities(row, self.class_order.len())
                    .map_err(|e| self.transport(resp.id, e.to_string()))?;
            }
            out.extend(probs);
        }
        Ok(out)
    }
}

impl Drop for BridgeClient {
    fn drop(&mut self) {
        if let Ok(mut s) = self.session.lock() {
            // closing stdin lets a well-behaved adapter exit on end-of-input
            s.stdin.take();
            if s.child.try_wait().ok().flatten().is_none() {
                thread::sleep(Duration::from_millis(20));
                if s.child.try_wait().ok().flatten().is_none() {
                    let _ = s.child.kill();
                }
            }
            let _ = s.child.wait();
        }
    }
}
