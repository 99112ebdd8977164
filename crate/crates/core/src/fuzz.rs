//! Seeded generator of valid, terminating Patch programs and input sets,
//! used to compare the interpreter with emitted code.
//!
//! Every program has the same frame: an entry module `main` taking
//! `n: integer`, `xs: list of integer` and `r: real`, returning `acc`, `ys`
//! and `q` to the caller and `shown` on the console, plus two helper
//! modules it may call. The body is random, nested at most four levels.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codegen::differential::InputSet;
use crate::expr::{parse_expr, parse_place, Expr, Place};
use crate::ident::Ident;
use crate::literal::render_value;
use crate::model::{
    build_module, Actual, AssignForm, Binding, DataObjectDecl, Group, ModuleDef, PatchProgram, Payload,
    ResultBinding, Source, Tree,
};
use crate::types::PatchType;
use crate::value::Value;

pub const MAX_DEPTH: usize = 4;

#[derive(Debug, Clone)]
pub struct FuzzCase {
    pub seed: u64,
    pub program: PatchProgram,
    pub inputs: Vec<InputSet>,
}

/// Program and `input_count` input sets for `seed`.
pub fn case(seed: u64, input_count: usize) -> FuzzCase {
    let program = program(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let inputs = (0..input_count).map(|_| input_set(&mut rng)).collect();
    FuzzCase { seed, program, inputs }
}

pub fn program(seed: u64) -> PatchProgram {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        fresh: 0,
        scope: Vec::new(),
    };
    let mut body = prologue();
    let count = g.rng.gen_range(2..=6);
    for _ in 0..count {
        body.extend(g.statement(1));
    }
    if g.rng.gen_bool(0.2) {
        body.push(display("shown"));
    }
    let main = build_module(
        "main",
        vec![
            DataObjectDecl::caller("n", PatchType::Integer),
            DataObjectDecl::caller("xs", PatchType::List(Box::new(PatchType::Integer))),
            DataObjectDecl::caller("r", PatchType::Real),
        ],
        vec![
            DataObjectDecl::caller("acc", PatchType::Integer),
            DataObjectDecl::caller("ys", PatchType::List(Box::new(PatchType::Integer))),
            DataObjectDecl::caller("q", PatchType::Real),
            DataObjectDecl {
                name: id("shown"),
                ty: PatchType::Integer,
                binding: Binding::Console,
            },
        ],
        body,
    );
    PatchProgram {
        entry: main.name.clone(),
        modules: vec![main, twice(), total()],
    }
}

pub fn input_set(rng: &mut impl Rng) -> InputSet {
    let len = if rng.gen_bool(0.1) { 0 } else { rng.gen_range(3..=8) };
    let xs: Vec<Value> = (0..len).map(|_| Value::Int(rng.gen_range(-20..=20))).collect();
    let r = rng.gen_range(-40..=40) as f64 / 8.0;
    let console = (0..rng.gen_range(0..=3)).map(|_| rng.gen_range(-9..=9).to_string()).collect();
    InputSet {
        values: vec![
            (id("n"), Value::Int(rng.gen_range(-3..=10))),
            (id("xs"), Value::List(xs)),
            (id("r"), Value::Real(r)),
        ],
        console,
    }
}

/// A random value of type `ty`: integers in [-1000, 1000], collections of
/// up to 20 elements.
pub fn arbitrary_value(ty: &PatchType, rng: &mut impl Rng) -> Value {
    match ty {
        PatchType::Integer | PatchType::Unknown => Value::Int(rng.gen_range(-1000..=1000)),
        PatchType::Real => Value::Real(rng.gen_range(-8000..=8000) as f64 / 8.0),
        PatchType::Boolean => Value::Bool(rng.gen_bool(0.5)),
        PatchType::String => {
            let len = rng.gen_range(0..=8);
            Value::str((0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect::<String>())
        }
        PatchType::List(elem) => {
            let len = rng.gen_range(0..=20);
            Value::List((0..len).map(|_| arbitrary_value(elem, rng)).collect())
        }
        PatchType::Set(elem) => {
            let len = rng.gen_range(0..=20);
            let items = (0..len).map(|_| arbitrary_value(elem, rng)).collect();
            Value::set(items).expect("homogeneous elements")
        }
        PatchType::Tuple(fields) => {
            let fields = fields.iter().map(|(n, t)| (n.clone(), arbitrary_value(t, rng))).collect();
            Value::tuple(fields).expect("distinct field names")
        }
    }
}

/// Random inputs for `m`: a value per caller input and one console line per
/// console input, in declaration order.
pub fn inputs_for(m: &ModuleDef, rng: &mut impl Rng) -> InputSet {
    let mut set = InputSet::new(Vec::new());
    for d in &m.inputs {
        match d.binding {
            Binding::Caller => set.values.push((d.name.clone(), arbitrary_value(&d.ty, rng))),
            Binding::Console => set.console.push(render_value(&arbitrary_value(&d.ty, rng))),
            Binding::Repository => {}
        }
    }
    set
}

fn id(s: &str) -> Ident {
    Ident::new(s).expect("valid identifier")
}

fn e(s: &str) -> Expr {
    parse_expr(s).unwrap_or_else(|err| panic!("generated expression {s:?} does not parse: {err}"))
}

fn place(s: &str) -> Place {
    parse_place(s).unwrap_or_else(|err| panic!("generated place {s:?} does not parse: {err}"))
}

fn transform(target: &str, expr: &str) -> Tree {
    Tree::leaf(Payload::Transform {
        target: place(target),
        expr: e(expr),
    })
}

fn display(expr: &str) -> Tree {
    Tree::leaf(Payload::Display { expr: e(expr), to: None })
}

fn prologue() -> Vec<Tree> {
    vec![
        transform("acc", "0"),
        transform("ys", "xs"),
        transform("q", "r"),
        transform("k", "1"),
        transform("flag", "FALSE"),
        transform("s", "\"ab\""),
        transform("shown", "n"),
        Tree::leaf(Payload::Display {
            expr: e("acc"),
            to: Some(id("memo")),
        }),
    ]
}

/// `twice(a, b) -> r` with `r = 2a - b`, clamped through a branch.
fn twice() -> ModuleDef {
    build_module(
        "twice",
        vec![
            DataObjectDecl::caller("a", PatchType::Integer),
            DataObjectDecl::caller("b", PatchType::Integer),
        ],
        vec![DataObjectDecl::caller("r", PatchType::Integer)],
        vec![
            transform("r", "(a * 2) - b"),
            Tree::with_body(Payload::ByPass { cond: e("r > 1000") }, vec![transform("r", "1000")]),
        ],
    )
}

/// `total(v) -> t`, the sum of `v` up to a `-999` marker.
fn total() -> ModuleDef {
    build_module(
        "total",
        vec![DataObjectDecl::caller("v", PatchType::List(Box::new(PatchType::Integer)))],
        vec![DataObjectDecl::caller("t", PatchType::Integer)],
        vec![
            transform("t", "0"),
            Tree::with_body(
                Payload::SentinelLoop {
                    var: id("x"),
                    collection: e("v"),
                    marker: e("-999"),
                },
                vec![transform("t", "t + x")],
            ),
        ],
    )
}

#[derive(Clone, Copy)]
enum Owner {
    Loop,
    Branch,
}

struct Gen {
    rng: ChaCha8Rng,
    fresh: usize,
    /// Integer loop variables visible at the current point.
    scope: Vec<String>,
}

impl Gen {
    fn fresh(&mut self, prefix: &str) -> String {
        self.fresh += 1;
        format!("{prefix}{}", self.fresh)
    }

    fn small(&mut self) -> i64 {
        self.rng.gen_range(-3..=9)
    }

    fn int_atom(&mut self) -> String {
        let mut pool: Vec<String> = ["acc", "k", "n", "LEN xs", "LEN ys", "shown"].iter().map(|s| s.to_string()).collect();
        pool.extend(self.scope.iter().cloned());
        match self.rng.gen_range(0..10) {
            0..=2 => self.small().to_string(),
            3 => format!("ys[{}]", self.index()),
            _ => pool.choose(&mut self.rng).cloned().unwrap_or_else(|| "k".into()),
        }
    }

    fn index(&mut self) -> String {
        if !self.scope.is_empty() && self.rng.gen_bool(0.6) {
            return self.scope.choose(&mut self.rng).cloned().unwrap_or_default();
        }
        match self.rng.gen_range(0..3) {
            0 => "LEN ys".into(),
            1 => "(k * k) - k + 1".into(),
            _ => self.rng.gen_range(1..=4).to_string(),
        }
    }

    fn int_expr(&mut self, depth: usize) -> String {
        if depth == 0 || self.rng.gen_bool(0.4) {
            return self.int_atom();
        }
        let a = self.int_expr(depth - 1);
        let b = self.int_expr(depth - 1);
        match self.rng.gen_range(0..6) {
            0 | 1 => format!("({a} + {b})"),
            2 | 3 => format!("({a} - {b})"),
            4 => format!("({a} * {b})"),
            _ => format!("(-({a}))"),
        }
    }

    fn real_expr(&mut self, depth: usize) -> String {
        let a = self.int_expr(depth.saturating_sub(1));
        let b = self.int_expr(depth.saturating_sub(1));
        match self.rng.gen_range(0..7) {
            0 => format!("({a} / {b})"),
            1 => format!("(q + {a})"),
            2 => "(q * r)".to_string(),
            3 => "(r - 0.25)".to_string(),
            4 => format!("(({a}) ^ 2)"),
            5 => "q".into(),
            _ => format!("(q / {b})"),
        }
    }

    fn bool_expr(&mut self, depth: usize) -> String {
        if depth > 0 && self.rng.gen_bool(0.25) {
            let a = self.bool_expr(depth - 1);
            let b = self.bool_expr(depth - 1);
            return match self.rng.gen_range(0..3) {
                0 => format!("({a} AND {b})"),
                1 => format!("({a} OR {b})"),
                _ => format!("(NOT {a})"),
            };
        }
        let a = self.int_expr(1);
        let b = self.int_expr(1);
        match self.rng.gen_range(0..9) {
            0 => format!("({a} < {b})"),
            1 => format!("({a} > {b})"),
            2 => format!("({a} <= {b})"),
            3 => format!("({a} >= {b})"),
            4 => format!("({a} = {b})"),
            5 => "flag".into(),
            6 => format!("({a} IN {{1, 2, 3, 5, 8}})"),
            7 => "(s < \"b\")".to_string(),
            _ => format!("({} > {})", self.real_expr(1), a),
        }
    }

    fn list_expr(&mut self) -> String {
        match self.rng.gen_range(0..4) {
            0 => "xs".into(),
            1 => "ys".into(),
            _ => {
                let items: Vec<String> = (0..self.rng.gen_range(1..=4)).map(|_| self.small().to_string()).collect();
                format!("[{}]", items.join(", "))
            }
        }
    }

    /// A non-empty sequence of statements, optionally ending in EXIT or STOP.
    fn group(&mut self, depth: usize, owner: Owner) -> Vec<Tree> {
        let count = self.rng.gen_range(1..=3);
        let mut out: Vec<Tree> = (0..count).flat_map(|_| self.statement(depth)).collect();
        let roll = self.rng.gen_range(0..20);
        if roll < 2 {
            out.push(Tree::leaf(Payload::Exit));
        } else if roll == 2 && matches!(owner, Owner::Branch) {
            out.push(Tree::leaf(Payload::Stop));
        }
        out
    }

    /// One statement; a conditional loop comes with its guard's
    /// initialisation in front.
    fn statement(&mut self, depth: usize) -> Vec<Tree> {
        if depth < MAX_DEPTH && self.rng.gen_range(0..20) == 0 {
            return self.conditional_loop(depth);
        }
        vec![self.simple_or_compound(depth)]
    }

    fn conditional_loop(&mut self, depth: usize) -> Vec<Tree> {
        // The guard variable is private to this loop, so it always reaches
        // its bound.
        let w = self.fresh("w");
        let bound = self.rng.gen_range(0..=4);
        let mut body = self.group(depth + 1, Owner::Loop);
        let step = transform(&w, &format!("{w} + 1"));
        if matches!(body.last().map(|t| &t.payload), Some(Payload::Exit)) {
            body.insert(body.len() - 1, step);
        } else {
            body.push(step);
        }
        let cond = if self.rng.gen_bool(0.5) {
            format!("{w} < {bound}")
        } else {
            format!("({w} < {bound}) AND {}", self.bool_expr(1))
        };
        vec![
            transform(&w, "0"),
            Tree::with_body(Payload::ConditionalLoop { cond: e(&cond) }, body),
        ]
    }

    fn simple_or_compound(&mut self, depth: usize) -> Tree {
        let compound = depth < MAX_DEPTH;
        let pick = if compound {
            self.rng.gen_range(0..20)
        } else {
            self.rng.gen_range(0..10)
        };
        match pick {
            0 | 1 => {
                let x = self.int_expr(2);
                let target = ["acc", "k", "shown"].choose(&mut self.rng).copied().unwrap_or("acc");
                transform(target, &x)
            }
            2 => {
                let x = self.real_expr(2);
                transform("q", &x)
            }
            3 => {
                let x = self.bool_expr(2);
                transform("flag", &x)
            }
            4 => {
                let (i, x) = (self.index(), self.int_expr(1));
                transform(&format!("ys[{i}]"), &x)
            }
            5 => match self.rng.gen_range(0..4) {
                0 => Tree::leaf(Payload::Assign(AssignForm::Copy {
                    target: place("acc"),
                    source: e(if self.rng.gen_bool(0.5) { "k" } else { "q" }),
                })),
                1 => Tree::leaf(Payload::Assign(AssignForm::Exchange {
                    left: place(&format!("ys[{}]", self.index())),
                    right: place(&format!("ys[{}]", self.index())),
                })),
                2 => Tree::leaf(Payload::Assign(AssignForm::Exchange {
                    left: place("acc"),
                    right: place("k"),
                })),
                _ => {
                    let l = self.list_expr();
                    transform("ys", &l)
                }
            },
            6 => {
                let x = match self.rng.gen_range(0..5) {
                    0 => self.real_expr(1),
                    1 => self.bool_expr(1),
                    2 => "ys".into(),
                    3 => "s".into(),
                    _ => self.int_expr(2),
                };
                display(&x)
            }
            7 => {
                if self.rng.gen_bool(0.5) {
                    Tree::leaf(Payload::Read {
                        target: id("k"),
                        ty: Some(PatchType::Integer),
                        from: Source::Console,
                    })
                } else {
                    // Stash acc in the repository and load it back into memo.
                    Tree::leaf(Payload::Display {
                        expr: e("acc"),
                        to: Some(id("memo")),
                    })
                }
            }
            8 => {
                let (a, b) = (self.int_expr(1), self.int_expr(1));
                let target = if self.rng.gen_bool(0.5) { "acc" } else { "k" };
                let named = |n: &str, x: String| Actual {
                    name: Some(id(n)),
                    expr: e(&x),
                };
                let args = if self.rng.gen_bool(0.5) {
                    vec![named("a", a), named("b", b)]
                } else {
                    vec![named("b", b), named("a", a)]
                };
                Tree::leaf(Payload::Call {
                    module: id("twice"),
                    args,
                    results: vec![ResultBinding {
                        output: id("r"),
                        target: place(target),
                    }],
                })
            }
            9 => {
                let l = self.list_expr();
                Tree::leaf(Payload::Call {
                    module: id("total"),
                    args: vec![Actual { name: None, expr: e(&l) }],
                    results: vec![ResultBinding {
                        output: id("t"),
                        target: place("acc"),
                    }],
                })
            }
            10 | 11 => {
                let c = self.bool_expr(2);
                let body = self.group(depth + 1, Owner::Branch);
                Tree::with_body(Payload::ByPass { cond: e(&c) }, body)
            }
            12 => {
                let c = self.bool_expr(2);
                let then = self.group(depth + 1, Owner::Branch);
                let other = self.group(depth + 1, Owner::Branch);
                Tree {
                    payload: Payload::EitherOr { cond: e(&c) },
                    groups: vec![(Group::Then, then), (Group::Else, other)],
                }
            }
            13 => self.labeled(depth),
            14 | 15 => {
                let v = self.fresh("i");
                let lo = match self.rng.gen_range(0..4) {
                    0 | 1 => "1".to_string(),
                    2 => self.rng.gen_range(-1..=3).to_string(),
                    _ => "LEN ys".into(),
                };
                let hi = match self.rng.gen_range(0..4) {
                    0 | 1 => "LEN ys".to_string(),
                    2 => "LEN xs".to_string(),
                    _ => self.rng.gen_range(0..=5).to_string(),
                };
                self.scope.push(v.clone());
                let body = self.group(depth + 1, Owner::Loop);
                self.scope.pop();
                Tree::with_body(
                    Payload::CounterLoop {
                        var: id(&v),
                        start: e(&lo),
                        end: e(&hi),
                    },
                    body,
                )
            }
            16 | 17 => {
                let v = self.fresh("x");
                let coll = self.list_expr();
                let marker = self.small();
                self.scope.push(v.clone());
                let body = self.group(depth + 1, Owner::Loop);
                self.scope.pop();
                Tree::with_body(
                    Payload::SentinelLoop {
                        var: id(&v),
                        collection: e(&coll),
                        marker: e(&marker.to_string()),
                    },
                    body,
                )
            }
            18 => Tree::leaf(Payload::Read {
                target: id("memo"),
                ty: Some(PatchType::Integer),
                from: Source::Repository,
            }),
            _ => {
                let x = self.int_expr(1);
                transform("acc", &format!("acc + ({x})"))
            }
        }
    }

    fn labeled(&mut self, depth: usize) -> Tree {
        let strings = self.rng.gen_bool(0.3);
        let (scrutinee, labels): (String, Vec<Value>) = if strings {
            ("s".into(), vec![Value::str("ab"), Value::str("b"), Value::str("")])
        } else {
            let mut ls: Vec<i64> = (0..self.rng.gen_range(1..=3)).map(|_| self.small()).collect();
            ls.sort_unstable();
            ls.dedup();
            (self.int_expr(1), ls.into_iter().map(Value::Int).collect())
        };
        let mut groups: Vec<(Group, Vec<Tree>)> = labels
            .into_iter()
            .map(|l| (Group::Case(l), self.group(depth + 1, Owner::Branch)))
            .collect();
        if self.rng.gen_bool(0.6) {
            groups.push((Group::Default, self.group(depth + 1, Owner::Branch)));
        }
        Tree {
            payload: Payload::Labeled { scrutinee: e(&scrutinee) },
            groups,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{run_module, ArgValue, RunConfig};
    use crate::model::StepKind;
    use crate::validate::validate;
    use std::collections::BTreeSet;

    #[test]
    fn generated_programs_validate() {
        for seed in 0..300 {
            let p = program(seed);
            let report = validate(&p);
            assert!(report.is_empty(), "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(program(7), program(7));
        assert_eq!(case(7, 3).inputs, case(7, 3).inputs);
        assert_ne!(program(7), program(8));
    }

    #[test]
    fn all_step_kinds_appear() {
        let mut kinds = BTreeSet::new();
        for seed in 0..100 {
            for m in &program(seed).modules {
                kinds.extend(m.steps.iter().map(|s| s.kind().as_str()));
            }
        }
        let all = [
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
        for k in all {
            assert!(kinds.contains(k.as_str()), "{k:?} never generated");
        }
    }

    #[test]
    fn generated_programs_terminate() {
        for seed in 0..100 {
            let c = case(seed, 3);
            for input in &c.inputs {
                let args = input
                    .values
                    .iter()
                    .map(|(n, v)| ArgValue::named(n.as_str(), v.clone()))
                    .collect();
                let ex = run_module(&c.program, &c.program.entry, args, input.console.clone(), RunConfig::default());
                if let Err(err) = &ex.result {
                    assert_ne!(err.kind, "loop-budget", "seed {seed}");
                }
            }
        }
    }

    #[test]
    fn arbitrary_values_have_their_type() {
        use crate::value::{fits_element, type_of};
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tuple = PatchType::Tuple(vec![(id("a"), PatchType::Real), (id("b"), PatchType::String)]);
        let types = [
            PatchType::Integer,
            PatchType::Real,
            PatchType::Boolean,
            PatchType::String,
            PatchType::list(PatchType::Integer),
            PatchType::set(PatchType::Integer),
            PatchType::list(tuple.clone()),
            tuple,
        ];
        for ty in &types {
            for _ in 0..50 {
                let v = arbitrary_value(ty, &mut rng);
                match (ty, &v) {
                    (PatchType::List(elem), Value::List(items)) | (PatchType::Set(elem), Value::Set(items)) => {
                        assert!(items.iter().all(|x| fits_element(elem, x)), "{v:?}");
                    }
                    _ => assert_eq!(&type_of(&v), ty),
                }
            }
        }
    }
}
