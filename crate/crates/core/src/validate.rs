//! Structural and scope rules for programs.
//!
//! Findings carry the module, the offending step id and a rule id. An empty
//! report means the program can run.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::expr::Place;
use crate::ident::Ident;
use crate::model::{AssignForm, Group, ModuleDef, Payload, PatchProgram, Step, StepKind};
use crate::resolver::{resolve_call, ActualSig, CallSignature};
use crate::typeck::{check_module, ModuleTypes};
use crate::types::PatchType;
use crate::value::values_equal;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Finding {
    pub module: String,
    /// Step id, or the module name for declaration-level findings.
    pub step: String,
    pub rule: &'static str,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step={} rule={} msg={}", self.step, self.rule, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has_rule(&self, rule: &str) -> bool {
        self.findings.iter().any(|f| f.rule == rule)
    }

    pub fn rules(&self) -> Vec<&'static str> {
        let mut r: Vec<_> = self.findings.iter().map(|f| f.rule).collect();
        r.dedup();
        r
    }
}

struct Ctx<'a> {
    module: &'a ModuleDef,
    out: Vec<Finding>,
}

impl Ctx<'_> {
    fn push(&mut self, step: &str, rule: &'static str, message: impl Into<String>) {
        let f = Finding {
            module: self.module.name.to_string(),
            step: step.to_string(),
            rule,
            message: message.into(),
        };
        if !self.out.contains(&f) {
            self.out.push(f);
        }
    }
}

pub fn validate(program: &PatchProgram) -> ValidationReport {
    let mut findings = Vec::new();
    let mut seen: HashSet<&Ident> = HashSet::new();
    for m in &program.modules {
        if !seen.insert(&m.name) {
            findings.push(Finding {
                module: m.name.to_string(),
                step: m.name.to_string(),
                rule: "duplicate-module",
                message: format!("module {} is defined more than once", m.name),
            });
        }
    }
    if program.module(&program.entry).is_none() {
        findings.push(Finding {
            module: program.entry.to_string(),
            step: program.entry.to_string(),
            rule: "entry-missing",
            message: format!("entry module {} does not exist", program.entry),
        });
    }
    for m in &program.modules {
        findings.extend(validate_module(Some(program), m).findings);
    }
    ValidationReport { findings }
}

/// Checks one module. With `program`, calls are checked against callees.
pub fn validate_module(program: Option<&PatchProgram>, m: &ModuleDef) -> ValidationReport {
    let mut cx = Ctx {
        module: m,
        out: Vec::new(),
    };
    declarations(&mut cx);
    let shape_ok = shape(&mut cx);
    for s in &m.steps {
        step_local(&mut cx, s);
    }
    if shape_ok {
        nesting(&mut cx);
        let (types, type_findings) = check_module(program, m);
        for f in type_findings {
            cx.push(&f.step, f.rule, f.message);
        }
        if let Some(p) = program {
            calls(&mut cx, p, &types);
        }
    }
    ValidationReport { findings: cx.out }
}

fn declarations(cx: &mut Ctx) {
    let m = cx.module;
    let here = m.name.to_string();
    for (label, list) in [("input", &m.inputs), ("output", &m.outputs)] {
        for (i, d) in list.iter().enumerate() {
            if list[..i].iter().any(|e| e.name == d.name) {
                cx.push(&here, "duplicate-decl", format!("{label} {} is declared twice", d.name));
            }
        }
    }
    for d in &m.inputs {
        if let Some(o) = m.output(&d.name) {
            if o.ty != d.ty {
                cx.push(
                    &here,
                    "decl-type-conflict",
                    format!("{} is an input of type {} and an output of type {}", d.name, d.ty, o.ty),
                );
            }
        }
    }
}

/// Graph rules. Returns false when the graph is too broken to walk.
fn shape(cx: &mut Ctx) -> bool {
    let m = cx.module;
    let mut ok = true;
    let Some(root) = m.root() else {
        cx.push(m.name.as_ref(), "root-kind", "the module has no root step");
        return false;
    };
    if root.kind() != StepKind::Module {
        cx.push(&root.id, "root-kind", format!("the first step must be the module root, found {}", root.kind()));
        ok = false;
    }
    for s in &m.steps[1..] {
        if s.kind() == StepKind::Module {
            cx.push(&s.id, "root-kind", "only the first step may be a module root");
            ok = false;
        }
    }
    let mut ids: HashSet<&str> = HashSet::new();
    for s in &m.steps {
        if !ids.insert(&s.id) {
            cx.push(&s.id, "duplicate-id", format!("step id {} is used twice", s.id));
            ok = false;
        }
    }
    let index = m.index();
    let mut solid_in: HashMap<&str, usize> = HashMap::new();
    let mut dashed_in: HashMap<&str, usize> = HashMap::new();
    for s in &m.steps {
        let targets = s
            .next
            .iter()
            .map(|n| (n.as_str(), true))
            .chain(s.children.iter().map(|c| (c.step.as_str(), false)));
        for (t, solid) in targets {
            if !index.contains_key(t) {
                cx.push(&s.id, "dangling-edge", format!("edge to missing step {t}"));
                ok = false;
                continue;
            }
            *if solid { &mut solid_in } else { &mut dashed_in }.entry(t).or_default() += 1;
        }
    }
    for s in &m.steps {
        let solid = solid_in.get(s.id.as_str()).copied().unwrap_or(0);
        let dashed = dashed_in.get(s.id.as_str()).copied().unwrap_or(0);
        let msg = if solid > 1 {
            Some(format!("{solid} solid edges lead into this step"))
        } else if dashed > 1 {
            Some(format!("{dashed} dashed edges lead into this step"))
        } else if solid == 1 && dashed == 1 {
            Some("both a solid and a dashed edge lead into this step".to_string())
        } else if s.id == root.id && solid + dashed > 0 {
            Some("the module root cannot have incoming edges".to_string())
        } else {
            None
        };
        if let Some(msg) = msg {
            cx.push(&s.id, "tree-shape", msg);
            ok = false;
        }
    }

    // Cycles, by depth-first search from every step.
    let n = m.steps.len();
    let succ = |i: usize| -> Vec<usize> {
        let s = &m.steps[i];
        s.next
            .iter()
            .map(String::as_str)
            .chain(s.children.iter().map(|c| c.step.as_str()))
            .filter_map(|t| index.get(t).copied())
            .collect()
    };
    let mut color = vec![0u8; n];
    let mut on_cycle = vec![false; n];
    for start in 0..n {
        if color[start] != 0 {
            continue;
        }
        color[start] = 1;
        let mut stack: Vec<(usize, Vec<usize>, usize)> = vec![(start, succ(start), 0)];
        while let Some(top) = stack.last_mut() {
            if top.2 == top.1.len() {
                color[top.0] = 2;
                stack.pop();
                continue;
            }
            let t = top.1[top.2];
            top.2 += 1;
            match color[t] {
                0 => {
                    color[t] = 1;
                    stack.push((t, succ(t), 0));
                }
                1 => {
                    let from = stack.iter().position(|e| e.0 == t).unwrap_or(0);
                    for e in &stack[from..] {
                        on_cycle[e.0] = true;
                    }
                }
                _ => {}
            }
        }
    }
    for (i, s) in m.steps.iter().enumerate() {
        if on_cycle[i] {
            cx.push(&s.id, "cycle", "following edges from this step leads back to it");
            ok = false;
        }
    }

    let mut reached = vec![false; n];
    let mut stack = vec![0usize];
    while let Some(i) = stack.pop() {
        if reached[i] {
            continue;
        }
        reached[i] = true;
        stack.extend(succ(i));
    }
    for (i, s) in m.steps.iter().enumerate() {
        if !reached[i] && !on_cycle[i] {
            cx.push(&s.id, "unreachable", "no path from the module root reaches this step");
        }
    }
    ok
}

fn step_local(cx: &mut Ctx, s: &Step) {
    let kind = s.kind();
    let count = |tag: &str| s.children.iter().filter(|c| c.group.tag() == tag).count();
    let total = s.children.len();
    let arity_ok = match kind {
        StepKind::Module => total == count("body") && total <= 1,
        StepKind::ByPass | StepKind::CounterLoop | StepKind::ConditionalLoop | StepKind::SentinelLoop => {
            total == 1 && count("body") == 1
        }
        StepKind::EitherOr => total == 2 && count("then") == 1 && count("else") == 1,
        StepKind::Labeled => count("case") >= 1 && count("default") <= 1 && total == count("case") + count("default"),
        StepKind::Exit | StepKind::Stop => true,
        _ => total == 0,
    };
    if !arity_ok {
        let groups: Vec<_> = s.children.iter().map(|c| c.group.tag()).collect();
        cx.push(&s.id, "children-arity", format!("a {kind} step cannot have child groups {groups:?}"));
    }
    if matches!(kind, StepKind::Exit | StepKind::Stop) && (s.next.is_some() || total > 0) {
        cx.push(&s.id, "terminal-step", format!("nothing may follow or hang below a {kind} step"));
    }
    if kind == StepKind::Labeled {
        let labels: Vec<_> = s
            .children
            .iter()
            .filter_map(|c| match &c.group {
                Group::Case(v) => Some(v),
                _ => None,
            })
            .collect();
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].iter().any(|k| values_equal(k, l)) {
                cx.push(&s.id, "label-unique", format!("label {l} appears more than once"));
            }
        }
    }
    if let Payload::Assign(AssignForm::Copy { source, .. }) = &s.payload {
        if !source.is_copyable() {
            cx.push(
                &s.id,
                "assign-pure",
                format!("an assignment copies a constant or an object; {source} computes a value, use a transformation"),
            );
        }
    }
}

/// Rules that depend on which compound steps enclose a step.
fn nesting(cx: &mut Ctx) {
    let m = cx.module;
    if m.root().is_none() {
        return;
    }
    let index = m.index();
    // (step, enclosing compound kinds, enclosing counter variables)
    let mut stack: Vec<(usize, bool, Vec<Ident>)> = vec![(0, false, Vec::new())];
    let mut visited = HashSet::new();
    while let Some((i, in_compound, counters)) = stack.pop() {
        if !visited.insert(i) {
            continue;
        }
        let s = &m.steps[i];
        if s.kind() == StepKind::Exit && !in_compound {
            cx.push(&s.id, "exit-outside", "EXIT must sit inside a loop or a branch");
        }
        for p in s.payload.writes() {
            if counters.contains(&p.var) {
                cx.push(&s.id, "counter-write", format!("counter {} cannot be changed inside its loop", p.var));
            }
        }
        if let Some(n) = s.next.as_deref().and_then(|n| index.get(n)) {
            stack.push((*n, in_compound, counters.clone()));
        }
        let mut inner = counters.clone();
        if let Payload::CounterLoop { var, .. } = &s.payload {
            inner.push(var.clone());
        }
        let child_compound = in_compound || s.kind().is_compound();
        for c in &s.children {
            if let Some(&k) = index.get(c.step.as_str()) {
                stack.push((k, child_compound, inner.clone()));
            }
        }
    }
}

fn calls(cx: &mut Ctx, program: &PatchProgram, types: &ModuleTypes) {
    let m = cx.module;
    for s in m.reading_order() {
        let Payload::Call { module, args, results } = &s.payload else { continue };
        let Some(callee) = program.module(module) else {
            cx.push(&s.id, "unknown-module", format!("no module named {module}"));
            continue;
        };
        let mut actuals = Vec::new();
        let mut typed = true;
        for a in args {
            match types.infer(&a.expr) {
                Ok(ty) => actuals.push(ActualSig {
                    name: a.name.clone(),
                    ty,
                }),
                Err(_) => typed = false,
            }
        }
        if typed {
            if let Err(e) = resolve_call(&CallSignature { actuals }, callee) {
                cx.push(&s.id, "call-resolve", format!("{}: {e}", e.kind()));
            }
        }
        for r in results {
            if callee.output(&r.output).is_none() {
                cx.push(&s.id, "unknown-output", format!("{module} has no output {}", r.output));
            }
        }
    }
}

/// Types of actual arguments of a call step, if they can be inferred.
pub fn call_signature(types: &ModuleTypes, args: &[crate::model::Actual]) -> Option<CallSignature> {
    let actuals = args
        .iter()
        .map(|a| {
            types.infer(&a.expr).ok().map(|ty: PatchType| ActualSig {
                name: a.name.clone(),
                ty,
            })
        })
        .collect::<Option<Vec<_>>>()?;
    Some(CallSignature { actuals })
}

/// Writes a step performs to a place rooted at `var`.
pub fn writes_var(s: &Step, var: &Ident) -> bool {
    s.payload.writes().iter().any(|p: &Place| &p.var == var)
}
