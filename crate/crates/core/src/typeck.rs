//! Static types of module variables.
//!
//! A variable's type comes from its declaration, or else from the first step
//! in reading order that defines the whole variable. Every later write is
//! coerced to that type, which keeps the interpreter and the emitted code in
//! step with each other.

use std::collections::BTreeMap;

use crate::expr::{Access, Expr, Place};
use crate::ident::Ident;
use crate::model::{AssignForm, Group, ModuleDef, Payload, PatchProgram, StepId};
use crate::ops::{BinaryOp, UnaryOp};
use crate::types::{compatible, congruent, unify, PatchType};
use crate::value::{type_of, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeIssue {
    Undefined(Ident),
    Mismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeFinding {
    pub step: StepId,
    pub rule: &'static str,
    pub message: String,
}

/// Variable types of one module, with variables listed in definition order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModuleTypes {
    pub vars: BTreeMap<Ident, PatchType>,
    pub order: Vec<Ident>,
}

impl ModuleTypes {
    pub fn get(&self, v: &Ident) -> Option<&PatchType> {
        self.vars.get(v)
    }

    fn define(&mut self, v: &Ident, t: PatchType) {
        if let Some(old) = self.vars.get_mut(v) {
            if let Some(u) = unify(old, &t) {
                *old = u;
            }
        } else {
            self.order.push(v.clone());
            self.vars.insert(v.clone(), t);
        }
    }

    pub fn infer(&self, e: &Expr) -> Result<PatchType, TypeIssue> {
        infer(e, &|v| self.vars.get(v).cloned())
    }
}

fn mismatch(msg: impl Into<String>) -> TypeIssue {
    TypeIssue::Mismatch(msg.into())
}

/// Type of `e` given the variable types `lookup` knows about.
pub fn infer(e: &Expr, lookup: &dyn Fn(&Ident) -> Option<PatchType>) -> Result<PatchType, TypeIssue> {
    use PatchType as T;
    Ok(match e {
        Expr::Lit(v) => type_of(v),
        Expr::Var(v) => lookup(v).ok_or_else(|| TypeIssue::Undefined(v.clone()))?,
        Expr::Index(c, i) => {
            let ct = infer(c, lookup)?;
            let it = infer(i, lookup)?;
            if !matches!(it, T::Integer | T::Unknown) {
                return Err(mismatch(format!("index must be an integer, got {it}")));
            }
            match ct {
                T::List(e) => *e,
                T::Tuple(fields) => match **i {
                    Expr::Lit(Value::Int(k)) if k >= 1 && (k as usize) <= fields.len() => {
                        fields[k as usize - 1].1.clone()
                    }
                    Expr::Lit(Value::Int(k)) => {
                        return Err(mismatch(format!("tuple has no member {k}")));
                    }
                    _ => return Err(mismatch("tuple members are indexed by constant positions")),
                },
                T::Unknown => T::Unknown,
                T::Set(_) => return Err(mismatch("set members can only be tested, not accessed")),
                other => return Err(mismatch(format!("a {other} value is not indexable"))),
            }
        }
        Expr::Field(c, name) => match infer(c, lookup)? {
            T::Tuple(fields) => fields
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t.clone())
                .ok_or_else(|| mismatch(format!("no member named {name}")))?,
            T::Unknown => T::Unknown,
            other => return Err(mismatch(format!("field access on a {other} value"))),
        },
        Expr::Unary(op, a) => {
            let t = infer(a, lookup)?;
            match (op, &t) {
                (_, T::Unknown) => match op {
                    UnaryOp::Not => T::Boolean,
                    UnaryOp::Len => T::Integer,
                    UnaryOp::Neg => T::Unknown,
                },
                (UnaryOp::Neg, T::Integer | T::Real) => t,
                (UnaryOp::Not, T::Boolean) => T::Boolean,
                (UnaryOp::Len, T::List(_) | T::Set(_)) => T::Integer,
                _ => return Err(mismatch(format!("operator {op} does not apply to {t}"))),
            }
        }
        Expr::Binary(op, a, b) => {
            let ta = infer(a, lookup)?;
            let tb = infer(b, lookup)?;
            binary_type(*op, &ta, &tb)?
        }
    })
}

fn binary_type(op: BinaryOp, a: &PatchType, b: &PatchType) -> Result<PatchType, TypeIssue> {
    use BinaryOp::*;
    use PatchType as T;
    let bad = || mismatch(format!("operator {op} does not apply to {a} and {b}"));
    let numeric = |t: &PatchType| t.is_numeric() || *t == T::Unknown;
    Ok(match op {
        Add | Sub | Mul => {
            if !(numeric(a) && numeric(b)) {
                return Err(bad());
            }
            match (a, b) {
                (T::Integer, T::Integer) => T::Integer,
                (T::Unknown, _) | (_, T::Unknown) => T::Unknown,
                _ => T::Real,
            }
        }
        Div | Pow => {
            if !(numeric(a) && numeric(b)) {
                return Err(bad());
            }
            T::Real
        }
        Lt | Gt | Le | Ge => {
            let ok = (numeric(a) && numeric(b))
                || (a == b && matches!(a, T::String | T::Boolean))
                || *a == T::Unknown
                || *b == T::Unknown;
            if !ok {
                return Err(bad());
            }
            T::Boolean
        }
        Eq => {
            if !compatible(a, b) {
                return Err(bad());
            }
            T::Boolean
        }
        And | Or => {
            let ok = |t: &PatchType| matches!(t, T::Boolean | T::Unknown);
            if !(ok(a) && ok(b)) {
                return Err(bad());
            }
            T::Boolean
        }
        In => match b {
            T::Set(e) if compatible(a, e) => T::Boolean,
            T::Unknown => T::Boolean,
            _ => return Err(bad()),
        },
        Union | Intersect | Diff => match (a, b) {
            (T::Set(x), T::Set(y)) if congruent(x, y) => {
                T::set(unify(x, y).expect("congruent types unify"))
            }
            _ => return Err(bad()),
        },
        Cross => match (a, b) {
            (T::Set(x), T::Set(y)) => T::set(T::Tuple(vec![
                (Ident::new("first").expect("valid identifier"), (**x).clone()),
                (Ident::new("second").expect("valid identifier"), (**y).clone()),
            ])),
            _ => return Err(bad()),
        },
    })
}

/// Type of the storage a place designates.
pub fn place_type(p: &Place, types: &ModuleTypes) -> Result<PatchType, TypeIssue> {
    types.infer(&p.to_expr())
}

struct Checker<'a> {
    program: Option<&'a PatchProgram>,
    module: &'a ModuleDef,
    types: ModuleTypes,
    findings: Vec<TypeFinding>,
}

impl Checker<'_> {
    fn report(&mut self, step: &str, issue: TypeIssue) {
        let (rule, message) = match issue {
            TypeIssue::Undefined(v) => (
                "undefined-variable",
                format!("{v} is used before any step defines it"),
            ),
            TypeIssue::Mismatch(m) => ("type-check", m),
        };
        let f = TypeFinding {
            step: step.to_string(),
            rule,
            message,
        };
        if !self.findings.contains(&f) {
            self.findings.push(f);
        }
    }

    fn mismatch(&mut self, step: &str, msg: String) {
        self.report(step, TypeIssue::Mismatch(msg));
    }

    fn expr(&mut self, step: &str, e: &Expr) -> Option<PatchType> {
        match self.types.infer(e) {
            Ok(t) => Some(t),
            Err(issue) => {
                self.report(step, issue);
                None
            }
        }
    }

    /// Records a write of a value of type `vt` (if known) into `p`.
    fn write(&mut self, step: &str, p: &Place, vt: Option<PatchType>) {
        if p.is_whole_var() {
            match (self.types.get(&p.var).cloned(), vt) {
                (Some(t), Some(vt)) => {
                    if !compatible(&vt, &t) {
                        self.mismatch(step, format!("cannot store a {vt} value in {} ({t})", p.var));
                    } else {
                        self.types.define(&p.var, vt);
                    }
                }
                (None, Some(vt)) => self.types.define(&p.var, vt),
                _ => {}
            }
            return;
        }
        // Element or member writes: the variable must already exist.
        for a in &p.path {
            if let Access::Index(i) = a {
                self.expr(step, i);
            }
        }
        let Some(target) = self.expr(step, &p.to_expr()) else { return };
        if let Some(vt) = vt {
            if !compatible(&vt, &target) {
                self.mismatch(step, format!("cannot store a {vt} value in {p} ({target})"));
            }
        }
    }

    fn condition(&mut self, step: &str, e: &Expr) {
        if let Some(t) = self.expr(step, e) {
            if !matches!(t, PatchType::Boolean | PatchType::Unknown) {
                self.mismatch(step, format!("condition must be boolean, got {t}"));
            }
        }
    }

    fn step(&mut self, id: &str, payload: &Payload, groups: &[Group]) {
        match payload {
            Payload::Module | Payload::Exit | Payload::Stop => {}
            Payload::Assign(AssignForm::Copy { target, source }) | Payload::Transform { target, expr: source } => {
                let vt = self.expr(id, source);
                self.write(id, target, vt);
            }
            Payload::Assign(AssignForm::Exchange { left, right }) => {
                let lt = self.expr(id, &left.to_expr());
                let rt = self.expr(id, &right.to_expr());
                if let (Some(lt), Some(rt)) = (lt, rt) {
                    if !compatible(&lt, &rt) {
                        self.mismatch(id, format!("cannot exchange a {lt} value with a {rt} value"));
                    }
                }
            }
            Payload::Read { target, ty, .. } => match (self.types.get(target).cloned(), ty) {
                (Some(t), Some(given)) if !compatible(given, &t) => {
                    self.mismatch(id, format!("read type {given} conflicts with {target} ({t})"));
                }
                (None, Some(given)) => self.types.define(target, given.clone()),
                (None, None) => self.findings.push(TypeFinding {
                    step: id.to_string(),
                    rule: "read-type",
                    message: format!("the type of {target} is unknown; declare it or give the read a type"),
                }),
                _ => {}
            },
            Payload::Display { expr, .. } => {
                self.expr(id, expr);
            }
            Payload::ByPass { cond } | Payload::EitherOr { cond } | Payload::ConditionalLoop { cond } => {
                self.condition(id, cond)
            }
            Payload::Labeled { scrutinee } => {
                if let Some(t) = self.expr(id, scrutinee) {
                    for g in groups {
                        if let Group::Case(label) = g {
                            let lt = type_of(label);
                            if !compatible(&lt, &t) {
                                self.mismatch(id, format!("label {label} ({lt}) cannot match a {t} value"));
                            }
                        }
                    }
                }
            }
            Payload::CounterLoop { var, start, end } => {
                for e in [start, end] {
                    if let Some(t) = self.expr(id, e) {
                        if !matches!(t, PatchType::Integer | PatchType::Unknown) {
                            self.mismatch(id, format!("loop bounds must be integers, got {t}"));
                        }
                    }
                }
                match self.types.get(var) {
                    Some(PatchType::Integer) => {}
                    Some(t) => {
                        let t = t.clone();
                        self.mismatch(id, format!("loop counter {var} must be an integer, not {t}"));
                    }
                    None => self.types.define(var, PatchType::Integer),
                }
            }
            Payload::SentinelLoop { var, collection, marker } => {
                let ct = self.expr(id, collection);
                let mt = self.expr(id, marker);
                match ct {
                    Some(PatchType::List(e)) => {
                        if let Some(mt) = mt {
                            if !compatible(&mt, &e) {
                                self.mismatch(id, format!("marker ({mt}) cannot match {e} elements"));
                            }
                        }
                        self.write(id, &Place { var: var.clone(), path: vec![] }, Some(*e));
                    }
                    Some(t) => self.mismatch(id, format!("a sentinel loop needs a list, got {t}")),
                    None => {}
                }
            }
            Payload::Call { module, args, results } => {
                for a in args {
                    self.expr(id, &a.expr);
                }
                let callee = self.program.and_then(|p| p.module(module));
                for r in results {
                    let ot = callee.and_then(|c| c.output(&r.output)).map(|d| d.ty.clone());
                    self.write(id, &r.target, ot);
                }
            }
        }
    }
}

/// Computes variable types for `m` and reports type errors. `program` is
/// used to look up callee output types; without it call results stay
/// untyped.
pub fn check_module(program: Option<&PatchProgram>, m: &ModuleDef) -> (ModuleTypes, Vec<TypeFinding>) {
    let mut c = Checker {
        program,
        module: m,
        types: ModuleTypes::default(),
        findings: Vec::new(),
    };
    for d in m.inputs.iter().chain(&m.outputs) {
        if !c.types.vars.contains_key(&d.name) {
            c.types.define(&d.name, d.ty.clone());
        }
    }
    for s in c.module.reading_order() {
        let groups: Vec<Group> = s.children.iter().map(|e| e.group.clone()).collect();
        c.step(&s.id, &s.payload, &groups);
    }
    (c.types, c.findings)
}

/// Variable types only, ignoring findings.
pub fn module_types(program: Option<&PatchProgram>, m: &ModuleDef) -> ModuleTypes {
    check_module(program, m).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::model::{build_module, DataObjectDecl, Tree};

    fn ty(s: &str) -> PatchType {
        s.parse().unwrap()
    }

    fn infer_in(src: &str, vars: &[(&str, &str)]) -> Result<PatchType, TypeIssue> {
        let map: BTreeMap<Ident, PatchType> = vars
            .iter()
            .map(|(n, t)| (Ident::new(n).unwrap(), ty(t)))
            .collect();
        infer(&parse_expr(src).unwrap(), &|v| map.get(v).cloned())
    }

    #[test]
    fn expression_types() {
        assert_eq!(infer_in("1 + 2", &[]), Ok(PatchType::Integer));
        assert_eq!(infer_in("1 + 2.5", &[]), Ok(PatchType::Real));
        assert_eq!(infer_in("1 / 2", &[]), Ok(PatchType::Real));
        assert_eq!(infer_in("LEN l - 1", &[("l", "list(integer)")]), Ok(PatchType::Integer));
        assert_eq!(infer_in("l[i] > l[i + 1]", &[("l", "list(integer)"), ("i", "integer")]), Ok(PatchType::Boolean));
        assert_eq!(
            infer_in("y[4]", &[("y", "tuple(no: integer, street: string, city: string, zip: integer)")]),
            Ok(PatchType::Integer)
        );
        assert_eq!(
            infer_in("{1} × {\"a\"}", &[]),
            Ok(ty("set(tuple(first: integer, second: string))"))
        );
        assert!(matches!(infer_in("z + 1", &[]), Err(TypeIssue::Undefined(_))));
        assert!(matches!(infer_in("1 + TRUE", &[]), Err(TypeIssue::Mismatch(_))));
        assert!(matches!(infer_in("s[1]", &[("s", "set(integer)")]), Err(TypeIssue::Mismatch(_))));
    }

    #[test]
    fn first_definition_fixes_type() {
        let m = build_module(
            "m",
            vec![DataObjectDecl::caller("n", PatchType::Integer)],
            vec![],
            vec![
                Tree::leaf(Payload::Transform {
                    target: Place::var("s"),
                    expr: parse_expr("0").unwrap(),
                }),
                Tree::with_body(
                    Payload::CounterLoop {
                        var: Ident::new("i").unwrap(),
                        start: Expr::int(1),
                        end: Expr::var("n"),
                    },
                    vec![Tree::leaf(Payload::Transform {
                        target: Place::var("s"),
                        expr: parse_expr("s + i / 2").unwrap(),
                    })],
                ),
            ],
        );
        let (types, findings) = check_module(None, &m);
        assert!(findings.is_empty(), "{findings:?}");
        assert_eq!(types.get(&Ident::new("s").unwrap()), Some(&PatchType::Integer));
        assert_eq!(types.get(&Ident::new("i").unwrap()), Some(&PatchType::Integer));
        let names: Vec<_> = types.order.iter().map(|v| v.to_string()).collect();
        assert_eq!(names, ["n", "s", "i"]);
    }

    #[test]
    fn reports_use_before_definition() {
        let m = build_module(
            "m",
            vec![],
            vec![],
            vec![Tree::leaf(Payload::Display {
                expr: parse_expr("z + 1").unwrap(),
                to: None,
            })],
        );
        let (_, findings) = check_module(None, &m);
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].rule, "undefined-variable");
        assert_eq!(findings[0].step, "1");
    }
}
