//! Console, repository and trace-sink adapters.

use std::collections::{HashMap, VecDeque};

use crate::ident::Ident;
use crate::trace::TraceEvent;
use crate::value::Value;

pub trait Console {
    /// Next input line, or `None` when input is exhausted.
    fn read_line(&mut self) -> Option<String>;
    fn display(&mut self, v: &Value);
}

/// Console fed from a fixed script that records what was displayed.
#[derive(Debug, Clone, Default)]
pub struct ScriptedConsole {
    pub lines: VecDeque<String>,
    pub displayed: Vec<Value>,
}

impl ScriptedConsole {
    pub fn new<I, S>(lines: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedConsole {
            lines: lines.into_iter().map(Into::into).collect(),
            displayed: Vec::new(),
        }
    }
}

impl Console for ScriptedConsole {
    fn read_line(&mut self) -> Option<String> {
        self.lines.pop_front()
    }

    fn display(&mut self, v: &Value) {
        self.displayed.push(v.clone());
    }
}

pub trait Repository {
    fn get(&self, module: &Ident, name: &Ident) -> Option<Value>;
    fn put(&mut self, module: &Ident, name: &Ident, v: Value);
}

#[derive(Debug, Clone, Default)]
pub struct MemoryRepository {
    pub values: HashMap<(Ident, Ident), Value>,
}

impl Repository for MemoryRepository {
    fn get(&self, module: &Ident, name: &Ident) -> Option<Value> {
        self.values.get(&(module.clone(), name.clone())).cloned()
    }

    fn put(&mut self, module: &Ident, name: &Ident, v: Value) {
        self.values.insert((module.clone(), name.clone()), v);
    }
}

/// Receives trace events. Returning `false` asks the run to halt.
pub trait TraceSink {
    fn emit(&mut self, ev: TraceEvent) -> bool;
}

#[derive(Debug, Clone, Default)]
pub struct VecSink {
    pub events: Vec<TraceEvent>,
}

impl TraceSink for VecSink {
    fn emit(&mut self, ev: TraceEvent) -> bool {
        self.events.push(ev);
        true
    }
}

/// Discards everything.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullSink;

impl TraceSink for NullSink {
    fn emit(&mut self, _ev: TraceEvent) -> bool {
        true
    }
}
