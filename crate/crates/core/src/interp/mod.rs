//! Tree-walking interpreter.
//!
//! Each module invocation gets one flat frame. Every executed step is
//! bracketed by `enter`/`exit-step` events; mutations, comparisons, swaps,
//! reads, displays and loop iterations get their own events in between.

mod io;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::rc::Rc;

use thiserror::Error;

pub use io::{Console, MemoryRepository, NullSink, Repository, ScriptedConsole, TraceSink, VecSink};

use crate::expr::{Access, Expr, Place};
use crate::ident::Ident;
use crate::literal::read_value;
use crate::model::{AssignForm, Binding, Group, ModuleDef, Payload, PatchProgram, Source, Step, StepId};
use crate::ops::{apply_binary, apply_unary, BinaryOp};
use crate::resolver::{resolve_call, ActualSig, CallSignature};
use crate::trace::{EventKind, Snapshot, TraceEvent};
use crate::typeck::{check_module, ModuleTypes};
use crate::types::PatchType;
use crate::validate::call_signature;
use crate::value::{assign_coerce, checked_position, field, index, type_of, values_equal, Value, ValueError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at {module}/{}: {message}", step.as_deref().unwrap_or("-"))]
pub struct RunError {
    pub kind: &'static str,
    pub message: String,
    pub module: String,
    pub step: Option<StepId>,
}

impl RunError {
    fn new(kind: &'static str, module: &Ident, step: Option<&str>, message: impl Into<String>) -> Self {
        RunError {
            kind,
            message: message.into(),
            module: module.to_string(),
            step: step.map(str::to_string),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Loop iterations allowed per run.
    pub loop_budget: u64,
    /// Trace events allowed per run.
    pub max_events: u64,
    /// Nested module invocations allowed.
    pub max_depth: usize,
    /// Variables of the entry module to snapshot. `None` means its inputs
    /// and outputs.
    pub watch: Option<Vec<Ident>>,
    /// Preview mode: steps of the entry module after this one in reading
    /// order are inert, and unset outputs are not an error.
    pub inert_after: Option<StepId>,
}

pub const DEFAULT_LOOP_BUDGET: u64 = 1_000_000;
pub const DEFAULT_MAX_EVENTS: u64 = 1_000_000;
pub const DEFAULT_MAX_DEPTH: usize = 100;

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            loop_budget: DEFAULT_LOOP_BUDGET,
            max_events: DEFAULT_MAX_EVENTS,
            max_depth: DEFAULT_MAX_DEPTH,
            watch: None,
            inert_after: None,
        }
    }
}

/// An argument of a run or call: optionally named, bound by the resolver.
#[derive(Debug, Clone, PartialEq)]
pub struct ArgValue {
    pub name: Option<Ident>,
    pub value: Value,
}

impl ArgValue {
    pub fn named(name: &str, value: Value) -> Self {
        ArgValue {
            name: Some(Ident::new(name).expect("valid identifier")),
            value,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunResult {
    /// Output data objects in declaration order.
    pub outputs: Vec<(Ident, Value)>,
    /// Final variables of the entry module.
    pub state: BTreeMap<Ident, Value>,
    pub stopped: bool,
}

/// Result of [`run_module`]: the run plus everything it emitted.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub result: Result<RunResult, RunError>,
    pub trace: Vec<TraceEvent>,
    pub displayed: Vec<Value>,
}

/// Runs `module` of `program` with a scripted console and an in-memory
/// repository, collecting the full trace.
pub fn run_module(
    program: &PatchProgram,
    module: &Ident,
    args: Vec<ArgValue>,
    console_lines: Vec<String>,
    cfg: RunConfig,
) -> Execution {
    let mut console = ScriptedConsole::new(console_lines);
    let mut repo = MemoryRepository::default();
    let mut sink = VecSink::default();
    let result = Interpreter::new(program, cfg, &mut console, &mut repo, &mut sink).run(module, args);
    Execution {
        result,
        trace: sink.events,
        displayed: console.displayed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Normal,
    Exited,
    Stopped,
}

struct Prepared {
    index: HashMap<String, usize>,
    types: ModuleTypes,
}

struct Frame<'p> {
    module: &'p ModuleDef,
    prep: Rc<Prepared>,
    vars: HashMap<Ident, Value>,
    depth: usize,
}

pub struct Interpreter<'a, 'p> {
    program: &'p PatchProgram,
    prepared: HashMap<Ident, Rc<Prepared>>,
    cfg: RunConfig,
    console: &'a mut dyn Console,
    repo: &'a mut dyn Repository,
    sink: &'a mut dyn TraceSink,
    seq: u64,
    iterations: u64,
    watch: Vec<Ident>,
    active: Option<HashSet<String>>,
}

impl<'a, 'p> Interpreter<'a, 'p> {
    pub fn new(
        program: &'p PatchProgram,
        cfg: RunConfig,
        console: &'a mut dyn Console,
        repo: &'a mut dyn Repository,
        sink: &'a mut dyn TraceSink,
    ) -> Self {
        let prepared = program
            .modules
            .iter()
            .map(|m| {
                let index = m.steps.iter().enumerate().map(|(i, s)| (s.id.clone(), i)).rev().collect();
                let types = check_module(Some(program), m).0;
                (m.name.clone(), Rc::new(Prepared { index, types }))
            })
            .collect();
        Interpreter {
            program,
            prepared,
            cfg,
            console,
            repo,
            sink,
            seq: 0,
            iterations: 0,
            watch: Vec::new(),
            active: None,
        }
    }

    /// Runs `module` as the entry point, binding `args` through the
    /// resolver.
    pub fn run(mut self, module: &Ident, args: Vec<ArgValue>) -> Result<RunResult, RunError> {
        let program = self.program;
        let m = program
            .module(module)
            .ok_or_else(|| RunError::new("resolution-failed", module, None, format!("no module named {module}")))?;
        let sig = CallSignature {
            actuals: args
                .iter()
                .map(|a| ActualSig {
                    name: a.name.clone(),
                    ty: type_of(&a.value),
                })
                .collect(),
        };
        let mapping = resolve_call(&sig, m)
            .map_err(|e| RunError::new("resolution-failed", module, None, format!("{}: {e}", e.kind())))?;
        self.watch = match &self.cfg.watch {
            Some(w) => w.clone(),
            None => {
                let mut w: Vec<Ident> = Vec::new();
                for d in m.inputs.iter().chain(&m.outputs) {
                    if !w.contains(&d.name) {
                        w.push(d.name.clone());
                    }
                }
                w
            }
        };
        if let Some(last) = self.cfg.inert_after.clone() {
            let order = m.reading_order();
            let pos = order
                .iter()
                .position(|s| s.id == last)
                .ok_or_else(|| RunError::new("unknown-step", module, Some(&last), "no such step in the module"))?;
            self.active = Some(order[..=pos].iter().map(|s| s.id.clone()).collect());
        }
        let mut frame = self.frame(m, 0);
        for (arg, formal) in args.into_iter().zip(&mapping.formals) {
            let ty = &m.input(formal).expect("resolver returns declared inputs").ty;
            let v = assign_coerce(arg.value, ty).map_err(|e| self.value_error(&frame, None, e))?;
            frame.vars.insert(formal.clone(), v);
        }
        let outcome = self.invoke(&mut frame)?;
        let mut outputs = Vec::new();
        for d in &m.outputs {
            match frame.vars.get(&d.name) {
                Some(v) => outputs.push((d.name.clone(), v.clone())),
                None if self.active.is_some() => {}
                None => {
                    return Err(RunError::new(
                        "unbound-variable",
                        &m.name,
                        None,
                        format!("output {} was never set", d.name),
                    ))
                }
            }
        }
        Ok(RunResult {
            outputs,
            state: frame.vars.into_iter().collect(),
            stopped: outcome == Outcome::Stopped,
        })
    }

    fn frame(&self, m: &'p ModuleDef, depth: usize) -> Frame<'p> {
        Frame {
            module: m,
            prep: self.prepared[&m.name].clone(),
            vars: HashMap::new(),
            depth,
        }
    }

    fn err(&self, f: &Frame, step: Option<&str>, kind: &'static str, msg: impl Into<String>) -> RunError {
        RunError::new(kind, &f.module.name, step, msg)
    }

    fn value_error(&self, f: &Frame, step: Option<&str>, e: ValueError) -> RunError {
        self.err(f, step, e.kind(), e.to_string())
    }

    fn snapshot(&self, f: &Frame) -> Snapshot {
        self.watch
            .iter()
            .filter_map(|v| f.vars.get(v).map(|x| (v.clone(), x.clone())))
            .collect()
    }

    fn emit(&mut self, f: &Frame, step: &str, kind: EventKind, touched: &[&Ident]) -> Result<(), RunError> {
        self.seq += 1;
        if self.seq > self.cfg.max_events {
            return Err(self.err(f, Some(step), "budget-exceeded", "the run produced too many trace events"));
        }
        let watched = f.depth == 0 && touched.iter().any(|v| self.watch.contains(v));
        let ev = TraceEvent {
            seq: self.seq,
            module: f.module.name.clone(),
            step: step.to_string(),
            kind,
            snapshot: watched.then(|| self.snapshot(f)),
        };
        if self.sink.emit(ev) {
            Ok(())
        } else {
            Err(self.err(f, Some(step), "halted", "the run was stopped"))
        }
    }

    fn tick(&mut self, f: &Frame, step: &str, iteration: u64) -> Result<(), RunError> {
        self.iterations += 1;
        if self.iterations > self.cfg.loop_budget {
            return Err(self.err(f, Some(step), "budget-exceeded", "loop iteration budget exhausted"));
        }
        self.emit(f, step, EventKind::LoopIter { iteration }, &[])
    }

    fn is_inert(&self, f: &Frame, id: &str) -> bool {
        f.depth == 0 && self.active.as_ref().is_some_and(|a| !a.contains(id))
    }

    fn step_at(&self, f: &Frame<'p>, id: &str) -> Result<&'p Step, RunError> {
        let module = f.module;
        f.prep
            .index
            .get(id)
            .map(|&i| &module.steps[i])
            .ok_or_else(|| self.err(f, Some(id), "malformed-tree", "edge to a missing step"))
    }

    /// Runs one module invocation: the root step, then output bindings.
    fn invoke(&mut self, f: &mut Frame<'p>) -> Result<Outcome, RunError> {
        let root = f
            .module
            .root()
            .ok_or_else(|| self.err(f, None, "malformed-tree", "module has no root step"))?;
        let all: Vec<Ident> = self.watch.to_vec();
        let all: Vec<&Ident> = all.iter().collect();
        self.emit(f, &root.id, EventKind::Enter, &all)?;
        let outcome = match root.group_head("body") {
            Some(head) => self.exec_chain(f, head)?,
            None => Outcome::Normal,
        };
        let module = f.module;
        for d in &module.outputs {
            if d.binding == Binding::Caller {
                continue;
            }
            let Some(v) = f.vars.get(&d.name).cloned() else { continue };
            match d.binding {
                Binding::Console => {
                    self.console.display(&v);
                    self.emit(f, &root.id, EventKind::Display { value: v, to: None }, &[])?;
                }
                Binding::Repository => {
                    self.repo.put(&module.name, &d.name, v.clone());
                    self.emit(f, &root.id, EventKind::Display { value: v, to: Some(d.name.clone()) }, &[])?;
                }
                Binding::Caller => {}
            }
        }
        if outcome != Outcome::Stopped {
            self.emit(f, &root.id, EventKind::ExitStep, &[])?;
        }
        Ok(outcome)
    }

    fn exec_chain(&mut self, f: &mut Frame<'p>, head: &str) -> Result<Outcome, RunError> {
        let mut cur = Some(head);
        while let Some(id) = cur {
            if self.is_inert(f, id) {
                break;
            }
            let step = self.step_at(f, id)?;
            match self.exec_step(f, step)? {
                Outcome::Normal => cur = step.next.as_deref(),
                other => return Ok(other),
            }
        }
        Ok(Outcome::Normal)
    }

    fn exec_group(&mut self, f: &mut Frame<'p>, step: &Step, tag: &str) -> Result<Outcome, RunError> {
        match step.group_head(tag) {
            Some(h) => self.exec_chain(f, h),
            None => Ok(Outcome::Normal),
        }
    }

    fn exec_step(&mut self, f: &mut Frame<'p>, step: &'p Step) -> Result<Outcome, RunError> {
        let id = step.id.as_str();
        self.emit(f, id, EventKind::Enter, &[])?;
        let outcome = match &step.payload {
            Payload::Module => return Err(self.err(f, Some(id), "malformed-tree", "nested module root")),
            Payload::Exit => {
                self.emit(f, id, EventKind::Exited, &[])?;
                Outcome::Exited
            }
            Payload::Stop => {
                self.emit(f, id, EventKind::Stopped, &[])?;
                return Ok(Outcome::Stopped);
            }
            Payload::Assign(AssignForm::Copy { target, source }) => {
                let v = self.eval(f, id, source)?;
                self.store(f, id, target, v, false)?;
                Outcome::Normal
            }
            Payload::Transform { target, expr } => {
                let v = self.eval(f, id, expr)?;
                self.store(f, id, target, v, true)?;
                Outcome::Normal
            }
            Payload::Assign(AssignForm::Exchange { left, right }) => {
                self.exchange(f, id, left, right)?;
                Outcome::Normal
            }
            Payload::Read { target, ty, from } => {
                let ty = f
                    .prep
                    .types
                    .get(target)
                    .cloned()
                    .or_else(|| ty.clone())
                    .unwrap_or(PatchType::Unknown);
                let v = match from {
                    Source::Console => {
                        let line = self
                            .console
                            .read_line()
                            .ok_or_else(|| self.err(f, Some(id), "console-exhausted", format!("no input left for {target}")))?;
                        read_value(line.trim(), &ty).map_err(|e| self.err(f, Some(id), e.kind(), e.to_string()))?
                    }
                    Source::Repository => {
                        let v = self.repo.get(&f.module.name, target).ok_or_else(|| {
                            self.err(f, Some(id), "repository-missing", format!("nothing stored under {target}"))
                        })?;
                        assign_coerce(v, &ty).map_err(|e| self.value_error(f, Some(id), e))?
                    }
                };
                f.vars.insert(target.clone(), v.clone());
                self.emit(f, id, EventKind::Read { var: target.clone(), value: v }, &[target])?;
                Outcome::Normal
            }
            Payload::Display { expr, to } => {
                let v = self.eval(f, id, expr)?;
                match to {
                    None => self.console.display(&v),
                    Some(key) => self.repo.put(&f.module.name, key, v.clone()),
                }
                self.emit(f, id, EventKind::Display { value: v, to: to.clone() }, &[])?;
                Outcome::Normal
            }
            Payload::ByPass { cond } => {
                if self.condition(f, id, cond)? {
                    self.exec_group(f, step, "body")?
                } else {
                    Outcome::Normal
                }
            }
            Payload::EitherOr { cond } => {
                let tag = if self.condition(f, id, cond)? { "then" } else { "else" };
                self.exec_group(f, step, tag)?
            }
            Payload::Labeled { scrutinee } => {
                let s = self.eval(f, id, scrutinee)?;
                let mut chosen = None;
                for c in &step.children {
                    if let Group::Case(label) = &c.group {
                        let hit = values_equal(&s, label);
                        self.emit(
                            f,
                            id,
                            EventKind::Compare {
                                lhs: s.clone(),
                                rhs: label.clone(),
                                op: BinaryOp::Eq,
                                result: hit,
                            },
                            &[],
                        )?;
                        if hit {
                            chosen = Some(c.step.as_str());
                            break;
                        }
                    }
                }
                let chosen = chosen.or_else(|| step.group_head("default").map(String::as_str));
                match chosen {
                    Some(h) => self.exec_chain(f, h)?,
                    None => Outcome::Normal,
                }
            }
            Payload::CounterLoop { var, start, end } => {
                let lo = self.int(f, id, start)?;
                let hi = self.int(f, id, end)?;
                let d: i64 = if lo <= hi { 1 } else { -1 };
                let mut cur = lo;
                let mut k = 0;
                loop {
                    k += 1;
                    self.tick(f, id, k)?;
                    let old = f.vars.insert(var.clone(), Value::Int(cur));
                    self.emit(
                        f,
                        id,
                        EventKind::Assign {
                            var: var.clone(),
                            target: var.to_string(),
                            old,
                            new: Value::Int(cur),
                        },
                        &[var],
                    )?;
                    match self.exec_group(f, step, "body")? {
                        Outcome::Normal => {}
                        Outcome::Exited => break Outcome::Normal,
                        Outcome::Stopped => return Ok(Outcome::Stopped),
                    }
                    if cur == hi {
                        break Outcome::Normal;
                    }
                    cur += d;
                }
            }
            Payload::ConditionalLoop { cond } => {
                let mut k = 0;
                loop {
                    if !self.condition(f, id, cond)? {
                        break Outcome::Normal;
                    }
                    k += 1;
                    self.tick(f, id, k)?;
                    match self.exec_group(f, step, "body")? {
                        Outcome::Normal => {}
                        Outcome::Exited => break Outcome::Normal,
                        Outcome::Stopped => return Ok(Outcome::Stopped),
                    }
                }
            }
            Payload::SentinelLoop { var, collection, marker } => {
                let coll = self.eval(f, id, collection)?;
                let Value::List(items) = coll else {
                    return Err(self.err(
                        f,
                        Some(id),
                        "type-mismatch",
                        format!("a sentinel loop needs a list, got {}", type_of(&coll)),
                    ));
                };
                let mark = self.eval(f, id, marker)?;
                let mut k = 0;
                let mut outcome = Outcome::Normal;
                for item in items {
                    let hit = values_equal(&item, &mark);
                    self.emit(
                        f,
                        id,
                        EventKind::Compare {
                            lhs: item.clone(),
                            rhs: mark.clone(),
                            op: BinaryOp::Eq,
                            result: hit,
                        },
                        &[],
                    )?;
                    if hit {
                        break;
                    }
                    k += 1;
                    self.tick(f, id, k)?;
                    self.store(f, id, &Place { var: var.clone(), path: Vec::new() }, item, false)?;
                    match self.exec_group(f, step, "body")? {
                        Outcome::Normal => {}
                        Outcome::Exited => break,
                        Outcome::Stopped => {
                            outcome = Outcome::Stopped;
                            break;
                        }
                    }
                }
                if outcome == Outcome::Stopped {
                    return Ok(outcome);
                }
                Outcome::Normal
            }
            Payload::Call { module, args, results } => {
                let mut values = Vec::with_capacity(args.len());
                for a in args {
                    values.push(self.eval(f, id, &a.expr)?);
                }
                let sig = call_signature(&f.prep.types, args)
                    .ok_or_else(|| self.err(f, Some(id), "resolution-failed", "argument types are unknown"))?;
                let program = self.program;
                let callee = program.module(module).ok_or_else(|| {
                    self.err(f, Some(id), "resolution-failed", format!("unknown-module: no module named {module}"))
                })?;
                let mapping = resolve_call(&sig, callee)
                    .map_err(|e| self.err(f, Some(id), "resolution-failed", format!("{}: {e}", e.kind())))?;
                if f.depth + 1 > self.cfg.max_depth {
                    return Err(self.err(f, Some(id), "recursion-limit", "too many nested module calls"));
                }
                let mut inner = self.frame(callee, f.depth + 1);
                for (v, formal) in values.into_iter().zip(&mapping.formals) {
                    let ty = &callee.input(formal).expect("resolver returns declared inputs").ty;
                    let v = assign_coerce(v, ty).map_err(|e| self.value_error(f, Some(id), e))?;
                    inner.vars.insert(formal.clone(), v);
                }
                self.invoke(&mut inner)?;
                for r in results {
                    let v = inner.vars.get(&r.output).cloned().ok_or_else(|| {
                        self.err(f, Some(id), "unbound-variable", format!("{module} never set output {}", r.output))
                    })?;
                    self.store(f, id, &r.target, v, false)?;
                }
                Outcome::Normal
            }
        };
        let outcome = match outcome {
            Outcome::Exited if step.kind().is_compound() => Outcome::Normal,
            Outcome::Stopped => return Ok(Outcome::Stopped),
            o => o,
        };
        self.emit(f, id, EventKind::ExitStep, &[])?;
        Ok(outcome)
    }

    fn condition(&mut self, f: &Frame, step: &str, e: &Expr) -> Result<bool, RunError> {
        match self.eval(f, step, e)? {
            Value::Bool(b) => Ok(b),
            other => Err(self.err(
                f,
                Some(step),
                "type-mismatch",
                format!("condition must be boolean, got {}", type_of(&other)),
            )),
        }
    }

    fn int(&mut self, f: &Frame, step: &str, e: &Expr) -> Result<i64, RunError> {
        match self.eval(f, step, e)? {
            Value::Int(i) => Ok(i),
            other => Err(self.err(
                f,
                Some(step),
                "type-mismatch",
                format!("expected an integer, got {}", type_of(&other)),
            )),
        }
    }

    fn eval(&mut self, f: &Frame, step: &str, e: &Expr) -> Result<Value, RunError> {
        let lift = |me: &Self, r: Result<Value, ValueError>| r.map_err(|err| me.value_error(f, Some(step), err));
        match e {
            Expr::Lit(v) => Ok(v.clone()),
            Expr::Var(v) => f
                .vars
                .get(v)
                .cloned()
                .ok_or_else(|| self.err(f, Some(step), "unbound-variable", format!("{v} has no value yet"))),
            Expr::Index(c, i) => {
                let c = self.eval(f, step, c)?;
                let i = self.eval(f, step, i)?;
                lift(self, index(&c, &i))
            }
            Expr::Field(c, name) => {
                let c = self.eval(f, step, c)?;
                lift(self, field(&c, name))
            }
            Expr::Unary(op, a) => {
                let a = self.eval(f, step, a)?;
                lift(self, apply_unary(*op, &a))
            }
            Expr::Binary(op @ (BinaryOp::And | BinaryOp::Or), a, b) => {
                let l = self.eval(f, step, a)?;
                match (op, &l) {
                    (BinaryOp::And, Value::Bool(false)) => return Ok(l),
                    (BinaryOp::Or, Value::Bool(true)) => return Ok(l),
                    (_, Value::Bool(_)) => {}
                    _ => return lift(self, apply_binary(*op, &l, &Value::Bool(true))),
                }
                let r = self.eval(f, step, b)?;
                lift(self, apply_binary(*op, &l, &r))
            }
            Expr::Binary(op, a, b) => {
                let l = self.eval(f, step, a)?;
                let r = self.eval(f, step, b)?;
                let v = lift(self, apply_binary(*op, &l, &r))?;
                if op.is_comparison() {
                    let result = v == Value::Bool(true);
                    self.emit(f, step, EventKind::Compare { lhs: l, rhs: r, op: *op, result }, &[])?;
                }
                Ok(v)
            }
        }
    }

    /// Evaluates the index expressions along a place, left to right.
    fn path_indices(&mut self, f: &Frame, step: &str, p: &Place) -> Result<Vec<Option<Value>>, RunError> {
        let mut out = Vec::with_capacity(p.path.len());
        for a in &p.path {
            out.push(match a {
                Access::Index(e) => Some(self.eval(f, step, e)?),
                Access::Field(_) => None,
            });
        }
        Ok(out)
    }

    fn read_place(&self, f: &Frame, step: &str, p: &Place, idx: &[Option<Value>]) -> Result<Option<Value>, RunError> {
        let Some(mut cur) = f.vars.get(&p.var) else { return Ok(None) };
        for (a, i) in p.path.iter().zip(idx) {
            let pos = |c: &Value| -> Result<usize, RunError> {
                checked_position(c, i.as_ref().expect("index value")).map_err(|e| self.value_error(f, Some(step), e))
            };
            cur = match (a, cur) {
                (Access::Index(_), Value::List(items)) => &items[pos(cur)?],
                (Access::Index(_), Value::Tuple(fields)) => &fields[pos(cur)?].1,
                (Access::Index(_), other) => {
                    pos(other)?;
                    unreachable!("checked_position rejects non-collections")
                }
                (Access::Field(name), Value::Tuple(fields)) => {
                    &fields
                        .iter()
                        .find(|(n, _)| n == name)
                        .ok_or_else(|| self.value_error(f, Some(step), ValueError::NoSuchField(name.clone())))?
                        .1
                }
                (Access::Field(_), other) => {
                    return Err(self.err(
                        f,
                        Some(step),
                        "type-mismatch",
                        format!("field access on a {} value", type_of(other)),
                    ))
                }
            };
        }
        Ok(Some(cur.clone()))
    }

    fn write_place(
        &self,
        f: &mut Frame,
        step: &str,
        p: &Place,
        idx: &[Option<Value>],
        v: Value,
    ) -> Result<Value, RunError> {
        let v = match f.prep.types.infer(&p.to_expr()) {
            Ok(t) if t != PatchType::Unknown => assign_coerce(v, &t).map_err(|e| self.value_error(f, Some(step), e))?,
            _ => v,
        };
        if p.path.is_empty() {
            f.vars.insert(p.var.clone(), v.clone());
            return Ok(v);
        }
        let module = f.module.name.clone();
        let fail = |kind: &'static str, msg: String| RunError::new(kind, &module, Some(step), msg);
        let mut cur = f
            .vars
            .get_mut(&p.var)
            .ok_or_else(|| fail("unbound-variable", format!("{} has no value yet", p.var)))?;
        for (a, i) in p.path.iter().zip(idx) {
            let pos = |c: &Value| {
                checked_position(c, i.as_ref().expect("index value")).map_err(|e| fail(e.kind(), e.to_string()))
            };
            cur = match a {
                Access::Index(_) => {
                    let k = pos(cur)?;
                    match cur {
                        Value::List(items) => &mut items[k],
                        Value::Tuple(fields) => &mut fields[k].1,
                        _ => unreachable!("checked_position rejects non-collections"),
                    }
                }
                Access::Field(name) => match cur {
                    Value::Tuple(fields) => {
                        &mut fields
                            .iter_mut()
                            .find(|(n, _)| n == name)
                            .ok_or_else(|| fail("no-such-field", format!("no member named {name}")))?
                            .1
                    }
                    other => return Err(fail("type-mismatch", format!("field access on a {} value", type_of(other)))),
                },
            };
        }
        *cur = v.clone();
        Ok(v)
    }

    fn store(&mut self, f: &mut Frame, step: &str, p: &Place, v: Value, transform: bool) -> Result<(), RunError> {
        let idx = self.path_indices(f, step, p)?;
        let old = if p.path.is_empty() {
            f.vars.get(&p.var).cloned()
        } else {
            self.read_place(f, step, p, &idx)?
        };
        let new = self.write_place(f, step, p, &idx, v)?;
        let (var, target) = (p.var.clone(), p.to_string());
        let kind = if transform {
            EventKind::Transform { var, target, old, new }
        } else {
            EventKind::Assign { var, target, old, new }
        };
        self.emit(f, step, kind, &[&p.var])
    }

    fn exchange(&mut self, f: &mut Frame, step: &str, left: &Place, right: &Place) -> Result<(), RunError> {
        let li = self.path_indices(f, step, left)?;
        let ri = self.path_indices(f, step, right)?;
        let missing = |me: &Self, p: &Place| me.err(f, Some(step), "unbound-variable", format!("{} has no value yet", p.var));
        let lv = self.read_place(f, step, left, &li)?.ok_or_else(|| missing(self, left))?;
        let rv = self.read_place(f, step, right, &ri)?.ok_or_else(|| missing(self, right))?;
        self.write_place(f, step, left, &li, rv)?;
        self.write_place(f, step, right, &ri, lv)?;
        let single = |p: &Place, idx: &[Option<Value>]| match (p.path.as_slice(), idx) {
            ([Access::Index(_)], [Some(Value::Int(k))]) => Some(*k),
            _ => None,
        };
        let (i, j) = (single(left, &li), single(right, &ri));
        let same = left.var == right.var && i.is_some() && j.is_some();
        self.emit(
            f,
            step,
            EventKind::Swap {
                left: left.to_string(),
                right: right.to_string(),
                container: same.then(|| left.var.clone()),
                i: if same { i } else { None },
                j: if same { j } else { None },
            },
            &[&left.var, &right.var],
        )
    }
}
