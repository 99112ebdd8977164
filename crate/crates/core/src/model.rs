//! Program representation: modules, declared data objects, and the step
//! graph.
//!
//! A module's steps live in a flat list and refer to each other by id. The
//! first step is the module root. `next` is the solid edge (what runs
//! afterwards), `children` are dashed edges, each pointing at the head of
//! one group (a loop body, a branch arm) whose remaining steps follow
//! through `next`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::expr::{Expr, Place};
use crate::ident::Ident;
use crate::types::PatchType;
use crate::value::Value;

pub type StepId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Binding {
    Console,
    Repository,
    Caller,
}

impl Binding {
    pub fn as_str(self) -> &'static str {
        match self {
            Binding::Console => "console",
            Binding::Repository => "repository",
            Binding::Caller => "caller",
        }
    }

    pub fn parse(s: &str) -> Option<Binding> {
        match s {
            "console" => Some(Binding::Console),
            "repository" => Some(Binding::Repository),
            "caller" => Some(Binding::Caller),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataObjectDecl {
    pub name: Ident,
    pub ty: PatchType,
    pub binding: Binding,
}

impl DataObjectDecl {
    pub fn caller(name: &str, ty: PatchType) -> Self {
        DataObjectDecl {
            name: Ident::new(name).expect("valid identifier"),
            ty,
            binding: Binding::Caller,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepKind {
    Module,
    Assign,
    Transform,
    Read,
    Display,
    ByPass,
    EitherOr,
    Labeled,
    CounterLoop,
    ConditionalLoop,
    SentinelLoop,
    Call,
    Exit,
    Stop,
}

impl StepKind {
    pub const ALL: [StepKind; 14] = [
        StepKind::Module,
        StepKind::Assign,
        StepKind::Transform,
        StepKind::Read,
        StepKind::Display,
        StepKind::ByPass,
        StepKind::EitherOr,
        StepKind::Labeled,
        StepKind::CounterLoop,
        StepKind::ConditionalLoop,
        StepKind::SentinelLoop,
        StepKind::Call,
        StepKind::Exit,
        StepKind::Stop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::Module => "module",
            StepKind::Assign => "assign",
            StepKind::Transform => "transform",
            StepKind::Read => "read",
            StepKind::Display => "display",
            StepKind::ByPass => "by-pass",
            StepKind::EitherOr => "either-or",
            StepKind::Labeled => "labeled",
            StepKind::CounterLoop => "counter-loop",
            StepKind::ConditionalLoop => "conditional-loop",
            StepKind::SentinelLoop => "sentinel-loop",
            StepKind::Call => "call",
            StepKind::Exit => "exit",
            StepKind::Stop => "stop",
        }
    }

    pub fn parse(s: &str) -> Option<StepKind> {
        StepKind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn is_loop(self) -> bool {
        matches!(
            self,
            StepKind::CounterLoop | StepKind::ConditionalLoop | StepKind::SentinelLoop
        )
    }

    pub fn is_branch(self) -> bool {
        matches!(self, StepKind::ByPass | StepKind::EitherOr | StepKind::Labeled)
    }

    /// Loops and branches: the steps that may own child groups and that
    /// catch EXIT.
    pub fn is_compound(self) -> bool {
        self.is_loop() || self.is_branch()
    }
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Console,
    Repository,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Console => "console",
            Source::Repository => "repository",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AssignForm {
    Copy { target: Place, source: Expr },
    Exchange { left: Place, right: Place },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Actual {
    pub name: Option<Ident>,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultBinding {
    pub output: Ident,
    pub target: Place,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Module,
    Assign(AssignForm),
    Transform { target: Place, expr: Expr },
    Read { target: Ident, ty: Option<PatchType>, from: Source },
    Display { expr: Expr, to: Option<Ident> },
    ByPass { cond: Expr },
    EitherOr { cond: Expr },
    Labeled { scrutinee: Expr },
    CounterLoop { var: Ident, start: Expr, end: Expr },
    ConditionalLoop { cond: Expr },
    SentinelLoop { var: Ident, collection: Expr, marker: Expr },
    Call { module: Ident, args: Vec<Actual>, results: Vec<ResultBinding> },
    Exit,
    Stop,
}

impl Payload {
    pub fn kind(&self) -> StepKind {
        match self {
            Payload::Module => StepKind::Module,
            Payload::Assign(_) => StepKind::Assign,
            Payload::Transform { .. } => StepKind::Transform,
            Payload::Read { .. } => StepKind::Read,
            Payload::Display { .. } => StepKind::Display,
            Payload::ByPass { .. } => StepKind::ByPass,
            Payload::EitherOr { .. } => StepKind::EitherOr,
            Payload::Labeled { .. } => StepKind::Labeled,
            Payload::CounterLoop { .. } => StepKind::CounterLoop,
            Payload::ConditionalLoop { .. } => StepKind::ConditionalLoop,
            Payload::SentinelLoop { .. } => StepKind::SentinelLoop,
            Payload::Call { .. } => StepKind::Call,
            Payload::Exit => StepKind::Exit,
            Payload::Stop => StepKind::Stop,
        }
    }

    /// Expressions evaluated by this step, for scope checks.
    pub fn reads(&self) -> Vec<&Expr> {
        match self {
            Payload::Assign(AssignForm::Copy { source, .. }) => vec![source],
            Payload::Transform { expr, .. } => vec![expr],
            Payload::Display { expr, .. } => vec![expr],
            Payload::ByPass { cond } | Payload::EitherOr { cond } | Payload::ConditionalLoop { cond } => {
                vec![cond]
            }
            Payload::Labeled { scrutinee } => vec![scrutinee],
            Payload::CounterLoop { start, end, .. } => vec![start, end],
            Payload::SentinelLoop { collection, marker, .. } => vec![collection, marker],
            Payload::Call { args, .. } => args.iter().map(|a| &a.expr).collect(),
            _ => Vec::new(),
        }
    }

    /// Places written by this step.
    pub fn writes(&self) -> Vec<Place> {
        let whole = |v: &Ident| Place {
            var: v.clone(),
            path: Vec::new(),
        };
        match self {
            Payload::Assign(AssignForm::Copy { target, .. }) | Payload::Transform { target, .. } => {
                vec![target.clone()]
            }
            Payload::Assign(AssignForm::Exchange { left, right }) => vec![left.clone(), right.clone()],
            Payload::Read { target, .. } => vec![whole(target)],
            Payload::CounterLoop { var, .. } | Payload::SentinelLoop { var, .. } => vec![whole(var)],
            Payload::Call { results, .. } => results.iter().map(|r| r.target.clone()).collect(),
            _ => Vec::new(),
        }
    }
}

/// Tag of a dashed edge.
#[derive(Debug, Clone, PartialEq)]
pub enum Group {
    Body,
    Then,
    Else,
    Case(Value),
    Default,
}

impl Group {
    pub fn tag(&self) -> &'static str {
        match self {
            Group::Body => "body",
            Group::Then => "then",
            Group::Else => "else",
            Group::Case(_) => "case",
            Group::Default => "default",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChildEdge {
    pub group: Group,
    pub step: StepId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub id: StepId,
    pub payload: Payload,
    pub next: Option<StepId>,
    pub children: Vec<ChildEdge>,
    /// Fields this version does not understand, kept for round trips.
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl Step {
    pub fn new(id: impl Into<StepId>, payload: Payload) -> Self {
        Step {
            id: id.into(),
            payload,
            next: None,
            children: Vec::new(),
            extra: BTreeMap::new(),
        }
    }

    pub fn kind(&self) -> StepKind {
        self.payload.kind()
    }

    pub fn group_head(&self, tag: &str) -> Option<&StepId> {
        self.children
            .iter()
            .find(|c| c.group.tag() == tag)
            .map(|c| &c.step)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleDef {
    pub name: Ident,
    pub inputs: Vec<DataObjectDecl>,
    pub outputs: Vec<DataObjectDecl>,
    /// `steps[0]` is the root.
    pub steps: Vec<Step>,
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl ModuleDef {
    pub fn root(&self) -> Option<&Step> {
        self.steps.first()
    }

    pub fn step(&self, id: &str) -> Option<&Step> {
        self.steps.iter().find(|s| s.id == id)
    }

    /// Id to position in `steps`. With duplicate ids the first wins.
    pub fn index(&self) -> HashMap<&str, usize> {
        let mut map = HashMap::with_capacity(self.steps.len());
        for (i, s) in self.steps.iter().enumerate() {
            map.entry(s.id.as_str()).or_insert(i);
        }
        map
    }

    pub fn caller_inputs(&self) -> impl Iterator<Item = &DataObjectDecl> {
        self.inputs.iter().filter(|d| d.binding == Binding::Caller)
    }

    pub fn input(&self, name: &Ident) -> Option<&DataObjectDecl> {
        self.inputs.iter().find(|d| &d.name == name)
    }

    pub fn output(&self, name: &Ident) -> Option<&DataObjectDecl> {
        self.outputs.iter().find(|d| &d.name == name)
    }

    /// Declared type of a data object, inputs first.
    pub fn declared_type(&self, name: &Ident) -> Option<&PatchType> {
        self.input(name).or_else(|| self.output(name)).map(|d| &d.ty)
    }

    /// Reading order: a step, then its child groups in order, then its
    /// solid successor. Only reachable steps appear; cycles are cut.
    pub fn reading_order(&self) -> Vec<&Step> {
        self.walk(false)
    }

    /// Canonical document order: a step, its solid successor chain, then
    /// its child groups.
    pub fn canonical_order(&self) -> Vec<&Step> {
        self.walk(true)
    }

    fn walk(&self, solid_first: bool) -> Vec<&Step> {
        let index = self.index();
        let mut seen = vec![false; self.steps.len()];
        let mut out = Vec::with_capacity(self.steps.len());
        let mut stack: Vec<usize> = Vec::new();
        if !self.steps.is_empty() {
            stack.push(0);
        }
        while let Some(i) = stack.pop() {
            if seen[i] {
                continue;
            }
            seen[i] = true;
            let s = &self.steps[i];
            out.push(s);
            let children = s.children.iter().rev().filter_map(|c| index.get(c.step.as_str()).copied());
            let next = s.next.as_deref().and_then(|n| index.get(n).copied());
            // Stack order is reversed: whatever is pushed last is visited first.
            if solid_first {
                stack.extend(children);
                stack.extend(next);
            } else {
                stack.extend(next);
                stack.extend(children);
            }
        }
        out
    }

    /// The steps of one group: its head and the solid chain after it.
    pub fn chain(&self, head: &str) -> Vec<&Step> {
        let index = self.index();
        let mut out = Vec::new();
        let mut cur = Some(head);
        while let Some(id) = cur {
            let Some(&i) = index.get(id) else { break };
            let s = &self.steps[i];
            if out.iter().any(|x: &&Step| x.id == s.id) {
                break;
            }
            out.push(s);
            cur = s.next.as_deref();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchProgram {
    pub modules: Vec<ModuleDef>,
    pub entry: Ident,
}

impl PatchProgram {
    pub fn module(&self, name: &Ident) -> Option<&ModuleDef> {
        self.modules.iter().find(|m| &m.name == name)
    }

    pub fn entry_module(&self) -> Option<&ModuleDef> {
        self.module(&self.entry)
    }
}

/// Nested description of a step, used to build modules without spelling
/// out ids and edges by hand.
#[derive(Debug, Clone)]
pub struct Tree {
    pub payload: Payload,
    pub groups: Vec<(Group, Vec<Tree>)>,
}

impl Tree {
    pub fn leaf(payload: Payload) -> Self {
        Tree {
            payload,
            groups: Vec::new(),
        }
    }

    pub fn with_body(payload: Payload, body: Vec<Tree>) -> Self {
        Tree {
            payload,
            groups: vec![(Group::Body, body)],
        }
    }
}

/// Builds a module whose root has id `m` and whose other steps are
/// numbered `1`, `2`, ... in reading order.
pub fn build_module(
    name: &str,
    inputs: Vec<DataObjectDecl>,
    outputs: Vec<DataObjectDecl>,
    body: Vec<Tree>,
) -> ModuleDef {
    let mut steps = vec![Step::new("m", Payload::Module)];
    let mut counter = 0usize;
    if let Some(head) = lay_out(&mut steps, &mut counter, body) {
        steps[0].children.push(ChildEdge {
            group: Group::Body,
            step: head,
        });
    }
    ModuleDef {
        name: Ident::new(name).expect("valid identifier"),
        inputs,
        outputs,
        steps,
        extra: BTreeMap::new(),
    }
}

fn lay_out(steps: &mut Vec<Step>, counter: &mut usize, seq: Vec<Tree>) -> Option<StepId> {
    let mut prev: Option<usize> = None;
    let mut head = None;
    for t in seq {
        *counter += 1;
        let id = counter.to_string();
        let pos = steps.len();
        steps.push(Step::new(id.clone(), t.payload));
        if let Some(p) = prev {
            steps[p].next = Some(id.clone());
        } else {
            head = Some(id);
        }
        for (group, members) in t.groups {
            if let Some(h) = lay_out(steps, counter, members) {
                steps[pos].children.push(ChildEdge { group, step: h });
            }
        }
        prev = Some(pos);
    }
    head
}
