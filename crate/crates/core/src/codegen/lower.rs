//! Lowering of validated modules to C++ or Python source. Both targets share
//! the walk over the step tree; they differ in block syntax and in how an
//! early exit leaves a branch.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::expr::{Access, Expr, Place};
use crate::ident::Ident;
use crate::model::{AssignForm, Binding, Group, ModuleDef, PatchProgram, Payload, Source, Step, StepKind};
use crate::ops::{BinaryOp, UnaryOp};
use crate::resolver::resolve_call;
use crate::typeck::{check_module, ModuleTypes};
use crate::types::PatchType;
use crate::validate::call_signature;
use crate::value::Value;

use super::CodegenError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Lang {
    Cxx,
    Py,
}

pub(crate) fn function_name(prefix: &str, module: &Ident) -> String {
    format!("{prefix}m_{module}")
}

fn var(v: &Ident) -> String {
    format!("v_{v}")
}

/// Per-module facts both targets need.
struct ModulePlan<'a> {
    module: &'a ModuleDef,
    types: ModuleTypes,
    index: BTreeMap<&'a str, usize>,
    locals: Vec<Ident>,
    /// Branch steps that must be wrapped so a direct EXIT can leave them.
    exit_wrapped: BTreeSet<&'a str>,
    has_stop: bool,
}

impl<'a> ModulePlan<'a> {
    fn new(program: &'a PatchProgram, m: &'a ModuleDef) -> Self {
        let types = check_module(Some(program), m).0;
        let index = m.steps.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).rev().collect();
        let mut locals: Vec<Ident> = Vec::new();
        let mut add = |v: &Ident| {
            if !locals.contains(v) {
                locals.push(v.clone());
            }
        };
        m.inputs.iter().chain(&m.outputs).for_each(|d| add(&d.name));
        types.order.iter().for_each(&mut add);
        for s in &m.steps {
            for p in s.payload.writes() {
                add(&p.var);
            }
            if let Payload::Read { target, .. } = &s.payload {
                add(target);
            }
        }
        let mut plan = ModulePlan {
            module: m,
            types,
            index,
            locals,
            exit_wrapped: BTreeSet::new(),
            has_stop: false,
        };
        plan.scan();
        plan
    }

    fn step(&self, id: &str) -> Option<&'a Step> {
        self.index.get(id).map(|&i| &self.module.steps[i])
    }

    fn chain(&self, head: Option<&str>) -> Vec<&'a Step> {
        let mut out: Vec<&'a Step> = Vec::new();
        let mut cur = head;
        while let Some(id) = cur {
            let Some(s) = self.step(id) else { break };
            if out.iter().any(|x| x.id == s.id) {
                break;
            }
            out.push(s);
            if matches!(s.kind(), StepKind::Exit | StepKind::Stop) {
                break;
            }
            cur = s.next.as_deref();
        }
        out
    }

    /// Finds the innermost compound step of every EXIT and notes stops.
    fn scan(&mut self) {
        let Some(root) = self.module.root() else { return };
        let mut stack: Vec<(&'a Step, Option<&'a Step>)> = Vec::new();
        for c in &root.children {
            for s in self.chain(Some(&c.step)) {
                stack.push((s, None));
            }
        }
        let mut seen = BTreeSet::new();
        while let Some((s, owner)) = stack.pop() {
            if !seen.insert(s.id.as_str()) {
                continue;
            }
            match s.kind() {
                StepKind::Stop => self.has_stop = true,
                StepKind::Exit => match owner {
                    Some(o) if o.kind().is_branch() => {
                        self.exit_wrapped.insert(o.id.as_str());
                    }
                    Some(_) => {}
                    None => self.has_stop = true,
                },
                _ => {}
            }
            for c in &s.children {
                for t in self.chain(Some(&c.step)) {
                    stack.push((t, Some(s)));
                }
            }
        }
    }

    fn ordinal(&self, s: &Step) -> usize {
        self.index.get(s.id.as_str()).copied().unwrap_or(0)
    }

    fn place_type(&self, p: &Place) -> PatchType {
        self.types.infer(&p.to_expr()).unwrap_or(PatchType::Unknown)
    }
}

pub(crate) struct Lowering<'a> {
    lang: Lang,
    program: &'a PatchProgram,
    prefix: String,
    out: String,
    depth: usize,
}

impl<'a> Lowering<'a> {
    pub(crate) fn new(lang: Lang, program: &'a PatchProgram, prefix: &str) -> Self {
        Lowering {
            lang,
            program,
            prefix: prefix.to_string(),
            out: String::new(),
            depth: 0,
        }
    }

    pub(crate) fn finish(self) -> String {
        self.out
    }

    pub(crate) fn blank(&mut self) {
        self.out.push('\n');
    }

    fn line(&mut self, text: impl AsRef<str>) {
        for _ in 0..self.depth {
            self.out.push_str("    ");
        }
        self.out.push_str(text.as_ref());
        self.out.push('\n');
    }

    fn rt(&self, f: &str) -> String {
        match self.lang {
            Lang::Cxx => format!("patch::{f}"),
            Lang::Py => format!("P.{f}"),
        }
    }

    /// Opens a block whose header is `head` (without brace or colon).
    fn open(&mut self, head: &str) {
        match self.lang {
            Lang::Cxx if head.is_empty() => self.line("{"),
            Lang::Cxx => self.line(format!("{head} {{")),
            Lang::Py => self.line(format!("{head}:")),
        }
        self.depth += 1;
    }

    fn close(&mut self) {
        self.depth -= 1;
        if self.lang == Lang::Cxx {
            self.line("}");
        }
    }

    /// Closes a block and opens the next arm of the same statement.
    fn reopen(&mut self, head: &str) {
        self.depth -= 1;
        match self.lang {
            Lang::Cxx => self.line(format!("}} {head} {{")),
            Lang::Py => self.line(format!("{head}:")),
        }
        self.depth += 1;
    }

    fn stmt(&mut self, text: impl AsRef<str>) {
        match self.lang {
            Lang::Cxx => self.line(format!("{};", text.as_ref())),
            Lang::Py => self.line(text),
        }
    }

    fn declare(&mut self, name: &str, init: &str) {
        match self.lang {
            Lang::Cxx => self.line(format!("patch::Value {name} = {init};")),
            Lang::Py => self.line(format!("{name} = {init}")),
        }
    }

    // Literals and expressions

    fn string_literal(&self, s: &str) -> String {
        let mut out = String::from("\"");
        for c in s.chars() {
            match c {
                '"' => out.push_str("\\\""),
                '\\' => out.push_str("\\\\"),
                '\n' => out.push_str("\\n"),
                '\t' => out.push_str("\\t"),
                '\r' => out.push_str("\\r"),
                c if (' '..='~').contains(&c) => out.push(c),
                c => match self.lang {
                    Lang::Cxx => {
                        let mut buf = [0u8; 4];
                        for b in c.encode_utf8(&mut buf).bytes() {
                            let _ = write!(out, "\\{b:03o}");
                        }
                    }
                    Lang::Py => {
                        let _ = write!(out, "\\U{:08x}", c as u32);
                    }
                },
            }
        }
        out.push('"');
        out
    }

    fn literal(&self, v: &Value) -> String {
        let list = |items: &[Value]| items.iter().map(|x| self.literal(x)).collect::<Vec<_>>().join(", ");
        match (self.lang, v) {
            (Lang::Cxx, Value::Int(i)) if *i == i64::MIN => "patch::Value::integer(INT64_MIN)".into(),
            (Lang::Cxx, Value::Int(i)) => format!("patch::Value::integer({i})"),
            (Lang::Py, Value::Int(i)) => i.to_string(),
            (Lang::Cxx, Value::Real(x)) => format!("patch::Value::real({})", crate::literal::render_real(*x)),
            (Lang::Py, Value::Real(x)) => format!("float(\"{}\")", crate::literal::render_real(*x)),
            (Lang::Cxx, Value::Bool(b)) => format!("patch::Value::boolean({b})"),
            (Lang::Py, Value::Bool(b)) => if *b { "True" } else { "False" }.into(),
            (Lang::Cxx, Value::Str(s)) => format!("patch::Value::str({})", self.string_literal(s)),
            (Lang::Py, Value::Str(s)) => self.string_literal(s),
            (Lang::Cxx, Value::List(xs)) => format!("patch::Value::list({{{}}})", list(xs)),
            (Lang::Py, Value::List(xs)) => format!("P.L({})", list(xs)),
            (Lang::Cxx, Value::Set(xs)) => format!("patch::Value::set({{{}}})", list(xs)),
            (Lang::Py, Value::Set(xs)) => format!("P.S({})", list(xs)),
            (_, Value::Tuple(fields)) => {
                let names = fields
                    .iter()
                    .map(|(n, _)| format!("\"{n}\""))
                    .collect::<Vec<_>>()
                    .join(", ");
                let vals = fields.iter().map(|(_, x)| self.literal(x)).collect::<Vec<_>>().join(", ");
                match self.lang {
                    Lang::Cxx => format!("patch::Value::tuple({{{names}}}, {{{vals}}})"),
                    Lang::Py => format!("P.T([{names}], [{vals}])"),
                }
            }
        }
    }

    /// A Patch index shifted to the 0-based native position.
    fn position(&self, i: &Expr) -> String {
        match i {
            Expr::Lit(Value::Int(k)) if *k > i64::MIN => self.literal(&Value::Int(k - 1)),
            _ => format!("{}({}, {})", self.rt("sub"), self.expr(i), self.literal(&Value::Int(1))),
        }
    }

    fn expr(&self, e: &Expr) -> String {
        match e {
            Expr::Lit(v) => self.literal(v),
            Expr::Var(v) => format!("{}({}, \"{v}\")", self.rt("get"), var(v)),
            Expr::Index(c, i) => self.apply("at", c, &self.position(i), i),
            Expr::Field(c, n) => format!("{}({}, \"{n}\")", self.rt("fld"), self.expr(c)),
            Expr::Unary(op, a) => {
                let f = match (op, self.lang) {
                    (UnaryOp::Neg, _) => "neg",
                    (UnaryOp::Not, _) => "not_",
                    (UnaryOp::Len, Lang::Cxx) => "len",
                    (UnaryOp::Len, Lang::Py) => "len_",
                };
                format!("{}({})", self.rt(f), self.expr(a))
            }
            Expr::Binary(op @ (BinaryOp::And | BinaryOp::Or), a, b) => {
                let f = if *op == BinaryOp::And { "and_" } else { "or_" };
                match self.lang {
                    Lang::Cxx => format!("{}({}, [&] {{ return {}; }})", self.rt(f), self.expr(a), self.expr(b)),
                    Lang::Py => format!("{}({}, lambda: {})", self.rt(f), self.expr(a), self.expr(b)),
                }
            }
            Expr::Binary(op, a, b) => {
                let f = match (op, self.lang) {
                    (BinaryOp::Add, _) => "add",
                    (BinaryOp::Sub, _) => "sub",
                    (BinaryOp::Mul, _) => "mul",
                    (BinaryOp::Div, _) => "div",
                    (BinaryOp::Pow, Lang::Cxx) => "pow",
                    (BinaryOp::Pow, Lang::Py) => "pow_",
                    (BinaryOp::Lt, _) => "lt",
                    (BinaryOp::Gt, _) => "gt",
                    (BinaryOp::Le, _) => "le",
                    (BinaryOp::Ge, _) => "ge",
                    (BinaryOp::Eq, _) => "eq",
                    (BinaryOp::In, Lang::Cxx) => "in",
                    (BinaryOp::In, Lang::Py) => "in_",
                    (BinaryOp::Diff, Lang::Cxx) => "except",
                    (BinaryOp::Diff, Lang::Py) => "except_",
                    (BinaryOp::Union, Lang::Cxx) => "union_",
                    (BinaryOp::Union, Lang::Py) => "union",
                    (BinaryOp::Intersect, _) => "intersect",
                    (BinaryOp::Cross, _) => "cross",
                    (BinaryOp::And | BinaryOp::Or, _) => unreachable!("handled above"),
                };
                self.apply(f, a, &self.expr(b), b)
            }
        }
    }

    /// `f(a, b)` where `b_text` is the lowered right operand. When both
    /// operands could fail with different errors, C++ gets them in a braced
    /// list so the left one is evaluated first.
    fn apply(&self, f: &str, a: &Expr, b_text: &str, b: &Expr) -> String {
        let simple = |e: &Expr| matches!(e, Expr::Lit(_));
        let var = |e: &Expr| matches!(e, Expr::Var(_));
        let ordered = self.lang == Lang::Cxx && !(simple(a) || simple(b) || (var(a) && var(b)));
        if ordered {
            format!("{}(patch::Both{{{}, {b_text}}})", self.rt(f), self.expr(a))
        } else {
            format!("{}({}, {b_text})", self.rt(f), self.expr(a))
        }
    }

    fn condition(&self, e: &Expr) -> String {
        format!("{}({})", self.rt("cond"), self.expr(e))
    }

    fn coerce(&self, t: &PatchType, value: String) -> String {
        match t {
            PatchType::Integer => format!("{}({value})", self.rt("to_int")),
            PatchType::Real => format!("{}({value})", self.rt("to_real")),
            _ => value,
        }
    }

    pub(crate) fn type_descriptor(&self, t: &PatchType) -> String {
        let simple = |name: &str| match self.lang {
            Lang::Cxx => format!("patch::{name}()"),
            Lang::Py => format!("P.{name}"),
        };
        match t {
            PatchType::Integer => simple("T_INT"),
            PatchType::Real => simple("T_REAL"),
            PatchType::Boolean => simple("T_BOOL"),
            PatchType::String => simple("T_STR"),
            PatchType::Unknown => simple("T_UNKNOWN"),
            PatchType::List(e) => format!("{}({})", self.rt("T_LIST"), self.type_descriptor(e)),
            PatchType::Set(e) => format!("{}({})", self.rt("T_SET"), self.type_descriptor(e)),
            PatchType::Tuple(fields) => {
                let names = fields.iter().map(|(n, _)| format!("\"{n}\"")).collect::<Vec<_>>().join(", ");
                let types = fields
                    .iter()
                    .map(|(_, t)| self.type_descriptor(t))
                    .collect::<Vec<_>>()
                    .join(", ");
                match self.lang {
                    Lang::Cxx => format!("patch::T_TUPLE({{{names}}}, {{{types}}})"),
                    Lang::Py => format!("P.T_TUPLE([{names}], [{types}])"),
                }
            }
        }
    }

    /// Path accessors of a place, with index expressions already bound to
    /// the given temporaries.
    fn accessors(&self, p: &Place, temps: &[Option<String>]) -> String {
        let parts: Vec<String> = p
            .path
            .iter()
            .zip(temps)
            .map(|(a, t)| match a {
                Access::Index(_) => format!("{}({})", self.rt("IX"), t.as_deref().unwrap_or_default()),
                Access::Field(n) => format!("{}(\"{n}\")", self.rt("FLD")),
            })
            .collect();
        match self.lang {
            Lang::Cxx => format!("{{{}}}", parts.join(", ")),
            Lang::Py => format!("({}{})", parts.join(", "), if parts.len() == 1 { "," } else { "" }),
        }
    }

    /// Binds the index expressions of `p` to fresh temporaries.
    fn bind_indices(&mut self, p: &Place, tag: &str) -> Vec<Option<String>> {
        let mut temps = Vec::new();
        for (k, a) in p.path.iter().enumerate() {
            match a {
                Access::Index(e) => {
                    let name = format!("{tag}{k}");
                    let init = self.position(e);
                    self.declare(&name, &init);
                    temps.push(Some(name));
                }
                Access::Field(_) => temps.push(None),
            }
        }
        temps
    }

    fn read_place(&self, p: &Place, temps: &[Option<String>]) -> String {
        if p.path.is_empty() {
            return format!("{}({}, \"{}\")", self.rt("get"), var(&p.var), p.var);
        }
        format!("{}({}, \"{}\", {})", self.rt("read"), var(&p.var), p.var, self.accessors(p, temps))
    }

    fn write_place(&mut self, p: &Place, temps: &[Option<String>], value: String) {
        if p.path.is_empty() {
            self.stmt(format!("{} = {value}", var(&p.var)));
            return;
        }
        let acc = self.accessors(p, temps);
        match self.lang {
            Lang::Cxx => self.stmt(format!("patch::put({}, \"{}\", {acc}, {value})", var(&p.var), p.var)),
            Lang::Py => self.stmt(format!("{v} = P.put({v}, \"{}\", {acc}, {value})", p.var, v = var(&p.var))),
        }
    }

    /// `place := value`, coercing to the place's static type unless the
    /// value is already known to have it.
    fn store(&mut self, plan: &ModulePlan, p: &Place, value: String, tag: &str, known: Option<PatchType>) {
        let mut t = plan.place_type(p);
        if known.as_ref() == Some(&t) {
            t = PatchType::Unknown;
        }
        if p.path.is_empty() {
            self.write_place(p, &[], self.coerce(&t, value));
            return;
        }
        self.scoped(|me| {
            me.declare(&format!("t{tag}"), &value);
            let temps = me.bind_indices(p, &format!("i{tag}_"));
            let coerced = me.coerce(&t, format!("t{tag}"));
            me.write_place(p, &temps, coerced);
        });
    }

    /// Runs `f` inside a C++ block so its temporaries stay local.
    fn scoped<R>(&mut self, f: impl FnOnce(&mut Self) -> R) -> R {
        match self.lang {
            Lang::Cxx => {
                self.open("");
                let r = f(self);
                self.close();
                r
            }
            Lang::Py => f(self),
        }
    }

    // Modules

    pub(crate) fn forward_declaration(&mut self, m: &ModuleDef) {
        if self.lang == Lang::Cxx {
            let sig = self.signature(m);
            self.line(format!("{sig};"));
        }
    }

    fn signature(&self, m: &ModuleDef) -> String {
        let params: Vec<String> = m.caller_inputs().map(|d| var(&d.name)).collect();
        let name = function_name(&self.prefix, &m.name);
        match self.lang {
            Lang::Cxx => {
                let mut ps = vec!["patch::Ctx& ctx".to_string(), "int depth".to_string()];
                ps.extend(params.iter().map(|p| format!("patch::Value {p}")));
                format!("patch::Outputs {name}({})", ps.join(", "))
            }
            Lang::Py => {
                let mut ps = vec!["ctx".to_string(), "depth".to_string()];
                ps.extend(params);
                format!("def {name}({})", ps.join(", "))
            }
        }
    }

    pub(crate) fn module(&mut self, m: &ModuleDef) -> Result<(), CodegenError> {
        let plan = ModulePlan::new(self.program, m);
        let sig = self.signature(m);
        self.open(&sig);
        let params: BTreeSet<&Ident> = m.caller_inputs().map(|d| &d.name).collect();
        for v in &plan.locals {
            if params.contains(v) {
                continue;
            }
            match self.lang {
                Lang::Cxx => self.line(format!("patch::Value {};", var(v))),
                Lang::Py => self.line(format!("{} = P.UNSET", var(v))),
            }
        }
        for d in m.caller_inputs() {
            let c = self.coerce(&d.ty, var(&d.name));
            if c != var(&d.name) {
                self.stmt(format!("{} = {c}", var(&d.name)));
            }
        }
        let body = m.root().and_then(|r| r.group_head("body")).map(String::as_str);
        let steps = plan.chain(body);
        match self.lang {
            Lang::Py if plan.has_stop => {
                self.open("try");
                self.chain(&plan, &steps)?;
                if steps.is_empty() {
                    self.line("pass");
                }
                self.reopen("except P.Stop");
                self.line("pass");
                self.depth -= 1;
            }
            _ => {
                self.chain(&plan, &steps)?;
                if self.lang == Lang::Cxx && plan.has_stop {
                    self.depth -= 1;
                    self.line("done:;");
                    self.depth += 1;
                }
            }
        }
        for d in &m.outputs {
            let set = match self.lang {
                Lang::Cxx => format!("{}.k != patch::K::Unset", var(&d.name)),
                Lang::Py => format!("{} is not P.UNSET", var(&d.name)),
            };
            match d.binding {
                Binding::Caller => {}
                Binding::Console => {
                    self.open(&self.if_head(&set));
                    self.stmt(format!("ctx.display({})", var(&d.name)));
                    self.close();
                }
                Binding::Repository => {
                    self.open(&self.if_head(&set));
                    self.stmt(format!("ctx.repo_put(\"{}\", \"{}\", {})", m.name, d.name, var(&d.name)));
                    self.close();
                }
            }
        }
        let pairs: Vec<String> = m
            .outputs
            .iter()
            .map(|d| match self.lang {
                Lang::Cxx => format!("{{\"{}\", {}}}", d.name, var(&d.name)),
                Lang::Py => format!("\"{}\": {}", d.name, var(&d.name)),
            })
            .collect();
        match self.lang {
            Lang::Cxx => self.stmt(format!("return patch::Outputs{{{}}}", pairs.join(", "))),
            Lang::Py => self.stmt(format!("return {{{}}}", pairs.join(", "))),
        }
        self.close();
        Ok(())
    }

    fn chain(&mut self, plan: &ModulePlan, steps: &[&Step]) -> Result<(), CodegenError> {
        for s in steps {
            self.step(plan, s)?;
        }
        Ok(())
    }

    fn group(&mut self, plan: &ModulePlan, s: &Step, tag: &str) -> Result<(), CodegenError> {
        let steps = plan.chain(s.group_head(tag).map(String::as_str));
        self.chain(plan, &steps)?;
        if steps.is_empty() && self.lang == Lang::Py {
            self.line("pass");
        }
        Ok(())
    }

    fn comment(&mut self, s: &Step) {
        let text = format!("{} {}", s.id, s.kind());
        match self.lang {
            Lang::Cxx => self.line(format!("// {text}")),
            Lang::Py => self.line(format!("# {text}")),
        }
    }

    fn step(&mut self, plan: &ModulePlan, s: &Step) -> Result<(), CodegenError> {
        let n = plan.ordinal(s);
        self.comment(s);
        let wrapped = plan.exit_wrapped.contains(s.id.as_str());
        if wrapped {
            match self.lang {
                Lang::Cxx => self.open("do"),
                Lang::Py => self.open("while True"),
            }
        }
        match &s.payload {
            Payload::Module => {
                return Err(CodegenError::Unsupported(format!("nested module root at step {}", s.id)));
            }
            Payload::Exit => {
                self.stmt("break");
            }
            Payload::Stop => match self.lang {
                Lang::Cxx => self.stmt("goto done"),
                Lang::Py => self.stmt("raise P.Stop()"),
            },
            Payload::Assign(AssignForm::Copy { target, source }) | Payload::Transform { target, expr: source } => {
                let v = self.expr(source);
                let known = plan.types.infer(source).ok();
                self.store(plan, target, v, &n.to_string(), known);
            }
            Payload::Assign(AssignForm::Exchange { left, right }) => {
                let (lt, rt) = (plan.place_type(left), plan.place_type(right));
                self.scoped(|me| {
                    let li = me.bind_indices(left, &format!("l{n}_"));
                    let ri = me.bind_indices(right, &format!("r{n}_"));
                    let held = format!("t{n}");
                    let first = me.read_place(left, &li);
                    me.declare(&held, &first);
                    let second = me.read_place(right, &ri);
                    let second = me.coerce(&lt, second);
                    me.write_place(left, &li, second);
                    let back = me.coerce(&rt, held);
                    me.write_place(right, &ri, back);
                });
            }
            Payload::Read { target, ty, from } => {
                let t = plan.types.get(target).cloned().or_else(|| ty.clone()).unwrap_or(PatchType::Unknown);
                let value = match from {
                    Source::Console => format!(
                        "{}(ctx.read_line(\"{target}\"), {})",
                        self.rt("parse_value"),
                        self.type_descriptor(&t)
                    ),
                    Source::Repository => {
                        self.coerce(&t, format!("ctx.repo_get(\"{}\", \"{target}\")", plan.module.name))
                    }
                };
                self.stmt(format!("{} = {value}", var(target)));
            }
            Payload::Display { expr, to } => {
                let v = self.expr(expr);
                match to {
                    None => self.stmt(format!("ctx.display({v})")),
                    Some(key) => self.stmt(format!("ctx.repo_put(\"{}\", \"{key}\", {v})", plan.module.name)),
                }
            }
            Payload::ByPass { cond } => {
                let head = self.if_head(&self.condition(cond));
                self.open(&head);
                self.group(plan, s, "body")?;
                self.close();
            }
            Payload::EitherOr { cond } => {
                let head = self.if_head(&self.condition(cond));
                self.open(&head);
                self.group(plan, s, "then")?;
                self.reopen("else");
                self.group(plan, s, "else")?;
                self.close();
            }
            Payload::Labeled { scrutinee } => {
                let sv = format!("s{n}");
                let init = self.expr(scrutinee);
                self.scoped(|me| {
                    me.declare(&sv, &init);
                    let mut first = true;
                    let cases: Vec<(&Value, &str)> = s
                        .children
                        .iter()
                        .filter_map(|c| match &c.group {
                            Group::Case(v) => Some((v, c.step.as_str())),
                            _ => None,
                        })
                        .collect();
                    let default = s.group_head("default").map(String::as_str);
                    let mut result = Ok(());
                    for (label, head) in &cases {
                        let test = format!("{}({sv}, {})", me.rt("equal"), me.literal(label));
                        let h = if first { me.if_head(&test) } else { me.elif_head(&test) };
                        if first {
                            me.open(&h);
                        } else {
                            me.reopen(&h);
                        }
                        first = false;
                        let steps = plan.chain(Some(head));
                        result = result.and_then(|_| me.chain(plan, &steps));
                        if steps.is_empty() && me.lang == Lang::Py {
                            me.line("pass");
                        }
                    }
                    if let Some(d) = default {
                        let steps = plan.chain(Some(d));
                        if first {
                            me.open(&me.if_head(&me.bool_true()));
                        } else {
                            me.reopen("else");
                        }
                        first = false;
                        result = result.and_then(|_| me.chain(plan, &steps));
                        if steps.is_empty() && me.lang == Lang::Py {
                            me.line("pass");
                        }
                    }
                    if !first {
                        me.close();
                    }
                    result
                })?;
            }
            Payload::CounterLoop { var: v, start, end } => {
                let (lo, hi) = (self.expr(start), self.expr(end));
                let c = format!("c{n}");
                match self.lang {
                    Lang::Cxx => {
                        self.open("");
                        self.line(format!("int64_t lo{n} = patch::as_int({lo});"));
                        self.line(format!("int64_t hi{n} = patch::as_int({hi});"));
                        self.line(format!("int64_t d{n} = lo{n} <= hi{n} ? 1 : -1;"));
                        self.open(&format!("for (int64_t {c} = lo{n};; {c} += d{n})"));
                        self.stmt("ctx.tick()");
                        self.stmt(format!("{} = patch::Value::integer({c})", var(v)));
                        self.group(plan, s, "body")?;
                        self.line(format!("if ({c} == hi{n}) break;"));
                        self.close();
                        self.close();
                    }
                    Lang::Py => {
                        self.open(&format!("for {c} in P.span(P.as_int({lo}), P.as_int({hi}))"));
                        self.stmt("ctx.tick()");
                        self.stmt(format!("{} = {c}", var(v)));
                        self.group(plan, s, "body")?;
                        self.close();
                    }
                }
            }
            Payload::ConditionalLoop { cond } => {
                let head = match self.lang {
                    Lang::Cxx => format!("while ({})", self.condition(cond)),
                    Lang::Py => format!("while {}", self.condition(cond)),
                };
                self.open(&head);
                self.stmt("ctx.tick()");
                self.group(plan, s, "body")?;
                self.close();
            }
            Payload::SentinelLoop { var: v, collection, marker } => {
                let t = plan.types.get(v).cloned().unwrap_or(PatchType::Unknown);
                let (coll, mark) = (self.expr(collection), self.expr(marker));
                let item = format!("x{n}");
                let stored = self.coerce(&t, item.clone());
                match self.lang {
                    Lang::Cxx => {
                        self.open("");
                        self.line(format!("const patch::Value c{n} = {coll};"));
                        self.line(format!("const std::vector<patch::Value>& items{n} = patch::items_of(c{n});"));
                        self.line(format!("const patch::Value m{n} = {mark};"));
                        self.open(&format!("for (const patch::Value& {item} : items{n})"));
                        self.line(format!("if (patch::equal({item}, m{n})) break;"));
                    }
                    Lang::Py => {
                        self.line(format!("c{n} = P.items_of({coll})"));
                        self.line(format!("m{n} = {mark}"));
                        self.open(&format!("for {item} in c{n}"));
                        self.open(&format!("if P.equal({item}, m{n})"));
                        self.line("break");
                        self.close();
                    }
                }
                self.stmt("ctx.tick()");
                self.stmt(format!("{} = {stored}", var(v)));
                self.group(plan, s, "body")?;
                self.close();
                if self.lang == Lang::Cxx {
                    self.close();
                }
            }
            Payload::Call { module, args, results } => {
                let program = self.program;
                let callee = program
                    .module(module)
                    .ok_or_else(|| CodegenError::InvalidProgram(format!("unknown module {module}")))?;
                let sig = call_signature(&plan.types, args)
                    .ok_or_else(|| CodegenError::InvalidProgram(format!("untyped arguments at step {}", s.id)))?;
                let mapping = resolve_call(&sig, callee)
                    .map_err(|e| CodegenError::InvalidProgram(format!("step {}: {e}", s.id)))?;
                let call = self.call_text(callee, &mapping.formals, n);
                self.scoped(|me| {
                    for (k, a) in args.iter().enumerate() {
                        let v = me.expr(&a.expr);
                        me.declare(&format!("a{n}_{k}"), &v);
                    }
                    match me.lang {
                        Lang::Cxx => {
                            me.line("if (depth + 1 > patch::MAX_DEPTH) patch::fail(\"recursion-limit\");");
                            me.line(format!("patch::Outputs r{n} = {call};"));
                        }
                        Lang::Py => {
                            me.open("if depth + 1 > P.MAX_DEPTH");
                            me.line("raise P.PatchError(\"recursion-limit\")");
                            me.close();
                            me.line(format!("r{n} = {call}"));
                        }
                    }
                    for (k, r) in results.iter().enumerate() {
                        let v = format!("{}(r{n}, \"{}\")", me.rt("out"), r.output);
                        me.store(plan, &r.target, v, &format!("{n}_{k}"), None);
                    }
                });
            }
        }
        if wrapped {
            match self.lang {
                Lang::Cxx => {
                    self.depth -= 1;
                    self.line("} while (false);");
                }
                Lang::Py => {
                    self.line("break");
                    self.depth -= 1;
                }
            }
        }
        Ok(())
    }

    fn call_text(&self, callee: &ModuleDef, formals: &[Ident], n: usize) -> String {
        let mut args = vec!["ctx".to_string(), "depth + 1".to_string()];
        for d in callee.caller_inputs() {
            let k = formals.iter().position(|f| f == &d.name).expect("resolver binds every formal");
            args.push(format!("a{n}_{k}"));
        }
        format!("{}({})", function_name(&self.prefix, &callee.name), args.join(", "))
    }

    fn if_head(&self, test: &str) -> String {
        match self.lang {
            Lang::Cxx => format!("if ({test})"),
            Lang::Py => format!("if {test}"),
        }
    }

    fn elif_head(&self, test: &str) -> String {
        match self.lang {
            Lang::Cxx => format!("else if ({test})"),
            Lang::Py => format!("elif {test}"),
        }
    }

    fn bool_true(&self) -> String {
        match self.lang {
            Lang::Cxx => "true".into(),
            Lang::Py => "True".into(),
        }
    }
}
