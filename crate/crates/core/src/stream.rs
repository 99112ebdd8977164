//! Live trace sessions: a run on a worker thread appends events that any
//! number of readers can replay from a sequence number and follow.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread;

use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::ident::Ident;
use crate::interp::{ArgValue, Interpreter, MemoryRepository, RunConfig, RunError, RunResult, ScriptedConsole, TraceSink};
use crate::model::PatchProgram;
use crate::trace::{encode_value, summarize, TraceEvent};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StreamError {
    #[error("unknown session {0}")]
    UnknownSession(String),
}

impl StreamError {
    pub fn kind(&self) -> &'static str {
        match self {
            StreamError::UnknownSession(_) => "unknown-session",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Running,
    Completed,
    Failed,
    Stopped,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Running => "running",
            RunStatus::Completed => "completed",
            RunStatus::Failed => "failed",
            RunStatus::Stopped => "stopped",
        }
    }

    pub fn is_final(self) -> bool {
        self != RunStatus::Running
    }
}

/// Final state of a session.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub status: RunStatus,
    pub outputs: Vec<(Ident, Value)>,
    pub error: Option<RunError>,
    pub events: usize,
    pub counts: BTreeMap<String, usize>,
    pub displayed: Vec<Value>,
}

impl RunSummary {
    pub fn to_json(&self) -> Json {
        let outputs: serde_json::Map<String, Json> =
            self.outputs.iter().map(|(k, v)| (k.to_string(), encode_value(v))).collect();
        json!({
            "status": self.status.as_str(),
            "outputs": outputs,
            "error": self.error.as_ref().map(|e| json!({
                "kind": e.kind,
                "message": e.message,
                "module": e.module,
                "step": e.step,
            })),
            "events": self.events,
            "counts": self.counts,
            "displayed": self.displayed.iter().map(encode_value).collect::<Vec<_>>(),
        })
    }
}

#[derive(Default)]
struct State {
    events: Vec<TraceEvent>,
    result: Option<Result<RunResult, RunError>>,
    stopped: bool,
    displayed: Vec<Value>,
}

type Listener = Box<dyn Fn() + Send + Sync>;

pub struct TraceSession {
    id: String,
    state: Mutex<State>,
    changed: Condvar,
    stop: AtomicBool,
    listeners: Mutex<Vec<Listener>>,
}

impl std::fmt::Debug for TraceSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TraceSession").field("id", &self.id).finish_non_exhaustive()
    }
}

impl TraceSession {
    pub fn new(id: impl Into<String>) -> Self {
        TraceSession {
            id: id.into(),
            state: Mutex::new(State::default()),
            changed: Condvar::new(),
            stop: AtomicBool::new(false),
            listeners: Mutex::new(Vec::new()),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn notify(&self) {
        self.changed.notify_all();
        for l in self.listeners.lock().unwrap_or_else(|p| p.into_inner()).iter() {
            l();
        }
    }

    /// Called after every append and once on finish.
    pub fn on_change(&self, f: impl Fn() + Send + Sync + 'static) {
        self.listeners.lock().unwrap_or_else(|p| p.into_inner()).push(Box::new(f));
    }

    /// Appends an event. Returns `false` once a stop has been requested or
    /// the session is finished.
    pub fn append(&self, ev: TraceEvent) -> bool {
        {
            let mut st = self.lock();
            if st.result.is_some() {
                return false;
            }
            st.events.push(ev);
        }
        self.notify();
        !self.stop.load(Ordering::SeqCst)
    }

    /// Records the run's result. Only the first call has any effect.
    pub fn finish(&self, result: Result<RunResult, RunError>, displayed: Vec<Value>) -> bool {
        {
            let mut st = self.lock();
            if st.result.is_some() {
                return false;
            }
            st.stopped = self.stop.load(Ordering::SeqCst)
                && matches!(&result, Err(e) if e.kind == "halted");
            st.result = Some(result);
            st.displayed = displayed;
        }
        self.notify();
        true
    }

    pub fn request_stop(&self) {
        self.stop.store(true, Ordering::SeqCst);
    }

    fn status_of(st: &State) -> RunStatus {
        match &st.result {
            None => RunStatus::Running,
            Some(_) if st.stopped => RunStatus::Stopped,
            Some(Ok(_)) => RunStatus::Completed,
            Some(Err(_)) => RunStatus::Failed,
        }
    }

    pub fn status(&self) -> RunStatus {
        Self::status_of(&self.lock())
    }

    /// Events with `seq >= from`, plus whether the session has finished.
    pub fn snapshot_from(&self, from: u64) -> (Vec<TraceEvent>, bool) {
        let st = self.lock();
        let start = st.events.partition_point(|e| e.seq < from);
        (st.events[start..].to_vec(), st.result.is_some())
    }

    /// Blocks until the session finishes.
    pub fn wait(&self) -> RunSummary {
        let mut st = self.lock();
        while st.result.is_none() {
            st = self.changed.wait(st).unwrap_or_else(|p| p.into_inner());
        }
        drop(st);
        self.summary()
    }

    pub fn summary(&self) -> RunSummary {
        let st = self.lock();
        let (outputs, error) = match &st.result {
            Some(Ok(r)) => (r.outputs.clone(), None),
            Some(Err(e)) => (Vec::new(), Some(e.clone())),
            None => (Vec::new(), None),
        };
        RunSummary {
            status: Self::status_of(&st),
            outputs,
            error,
            events: st.events.len(),
            counts: summarize(&st.events),
            displayed: st.displayed.clone(),
        }
    }

    /// Blocking iterator over events from `from` onwards; ends when the
    /// session finishes and everything has been delivered.
    pub fn subscribe(self: &Arc<Self>, from: u64) -> Subscription {
        Subscription {
            session: Arc::clone(self),
            next: from,
            pending: Vec::new().into_iter(),
        }
    }
}

pub struct Subscription {
    session: Arc<TraceSession>,
    next: u64,
    pending: std::vec::IntoIter<TraceEvent>,
}

impl Iterator for Subscription {
    type Item = TraceEvent;

    fn next(&mut self) -> Option<TraceEvent> {
        loop {
            if let Some(ev) = self.pending.next() {
                self.next = ev.seq + 1;
                return Some(ev);
            }
            let s = &self.session;
            let mut st = s.lock();
            loop {
                let start = st.events.partition_point(|e| e.seq < self.next);
                if start < st.events.len() {
                    self.pending = st.events[start..].to_vec().into_iter();
                    break;
                }
                if st.result.is_some() {
                    return None;
                }
                st = s.changed.wait(st).unwrap_or_else(|p| p.into_inner());
            }
        }
    }
}

/// Registry of sessions by id.
#[derive(Debug, Default)]
pub struct SessionHub {
    sessions: Mutex<HashMap<String, Arc<TraceSession>>>,
    counter: AtomicU64,
}

impl SessionHub {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn create(&self) -> Arc<TraceSession> {
        let n = self.counter.fetch_add(1, Ordering::SeqCst) + 1;
        let s = Arc::new(TraceSession::new(format!("run-{n}")));
        self.sessions
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .insert(s.id().to_string(), Arc::clone(&s));
        s
    }

    pub fn get(&self, id: &str) -> Result<Arc<TraceSession>, StreamError> {
        self.sessions
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| StreamError::UnknownSession(id.to_string()))
    }
}

struct SessionSink(Arc<TraceSession>);

impl TraceSink for SessionSink {
    fn emit(&mut self, ev: TraceEvent) -> bool {
        self.0.append(ev)
    }
}

/// Everything a background run needs.
#[derive(Debug, Clone)]
pub struct RunRequest {
    pub program: Arc<PatchProgram>,
    pub module: Ident,
    pub args: Vec<ArgValue>,
    pub console: Vec<String>,
    pub config: RunConfig,
}

const WORKER_STACK: usize = 64 * 1024 * 1024;

/// Starts `req` on a worker thread, streaming into `session`.
pub fn start_run(session: Arc<TraceSession>, req: RunRequest) -> thread::JoinHandle<()> {
    thread::Builder::new()
        .name(format!("patch-{}", session.id()))
        .stack_size(WORKER_STACK)
        .spawn(move || {
            let mut console = ScriptedConsole::new(req.console);
            let mut repo = MemoryRepository::default();
            let mut sink = SessionSink(Arc::clone(&session));
            let result = Interpreter::new(&req.program, req.config, &mut console, &mut repo, &mut sink)
                .run(&req.module, req.args);
            session.finish(result, console.displayed);
        })
        .expect("spawn run thread")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::run_module;
    use crate::model::build_module;
    use crate::model::{Payload, Tree};
    use crate::reference::bubble_sort_program;

    fn request(xs: &[i64]) -> RunRequest {
        let p = bubble_sort_program();
        RunRequest {
            module: p.entry.clone(),
            program: Arc::new(p),
            args: vec![ArgValue::named("list", Value::List(xs.iter().map(|&x| Value::Int(x)).collect()))],
            console: vec![],
            config: RunConfig::default(),
        }
    }

    #[test]
    fn subscription_matches_in_process_trace() {
        let hub = SessionHub::new();
        let s = hub.create();
        let req = request(&[29, -4, 2, 17, 45, 9]);
        let direct = run_module(&req.program, &req.module, req.args.clone(), vec![], RunConfig::default());
        let sub = s.subscribe(1);
        let h = start_run(Arc::clone(&s), req);
        let streamed: Vec<_> = sub.collect();
        h.join().unwrap();
        assert_eq!(streamed, direct.trace);
        let sum = s.wait();
        assert_eq!(sum.status, RunStatus::Completed);
        assert_eq!(sum.outputs, direct.result.unwrap().outputs);

        let late: Vec<_> = s.subscribe(10).collect();
        assert_eq!(late[..], direct.trace[9..]);
        assert_eq!(s.snapshot_from(u64::MAX).0.len(), 0);
    }

    #[test]
    fn unknown_session() {
        let hub = SessionHub::new();
        let a = hub.create();
        assert_eq!(hub.get(a.id()).unwrap().id(), a.id());
        assert_eq!(hub.get("nope").unwrap_err().kind(), "unknown-session");
        assert_ne!(hub.create().id(), a.id());
    }

    #[test]
    fn stop_halts_an_endless_run() {
        let m = build_module(
            "spin",
            vec![],
            vec![],
            vec![Tree::with_body(
                Payload::ConditionalLoop {
                    cond: "TRUE".parse().unwrap(),
                },
                vec![],
            )],
        );
        let p = PatchProgram {
            entry: m.name.clone(),
            modules: vec![m],
        };
        let s = Arc::new(TraceSession::new("x"));
        let mut sub = s.subscribe(1);
        let h = start_run(
            Arc::clone(&s),
            RunRequest {
                module: p.entry.clone(),
                program: Arc::new(p),
                args: vec![],
                console: vec![],
                config: RunConfig::default(),
            },
        );
        assert!(sub.next().is_some());
        s.request_stop();
        h.join().unwrap();
        assert_eq!(s.wait().status, RunStatus::Stopped);
        assert!(sub.count() < 1_000_000);
    }

    #[test]
    fn finish_only_once() {
        let s = TraceSession::new("y");
        assert!(s.finish(Ok(RunResult::default()), vec![]));
        assert!(!s.finish(Err(RunError {
            kind: "halted",
            message: String::new(),
            module: String::new(),
            step: None,
        }), vec![]));
        assert_eq!(s.status(), RunStatus::Completed);
    }
}
