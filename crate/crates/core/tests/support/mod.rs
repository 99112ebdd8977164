//! Oracles and generators shared by the property tests and the
//! acceptance gate.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use patch_core::expr::{parse_expr, parse_place};
use patch_core::fuzz;
use patch_core::ident::Ident;
use patch_core::interp::{run_module, ArgValue, RunConfig};
use patch_core::model::{build_module, ChildEdge, DataObjectDecl, Group, ModuleDef, PatchProgram, Payload, Step, StepKind};
use patch_core::reference::bubble_sort_program;
use patch_core::resolver::{resolve_call, ActualSig, CallSignature};
use patch_core::serial::{parse, serialize, PatchDocument};
use patch_core::types::{compatible, PatchType};
use patch_core::validate::validate;
use patch_core::value::Value;

pub fn sort_with_interpreter(xs: &[i64]) -> Vec<i64> {
    let p = bubble_sort_program();
    let list = Value::List(xs.iter().copied().map(Value::Int).collect());
    let ex = run_module(&p, &p.entry, vec![ArgValue::named("list", list)], vec![], RunConfig::default());
    match &ex.result.unwrap().outputs[0].1 {
        Value::List(items) => items.iter().map(|v| v.as_int().unwrap()).collect(),
        other => panic!("not a list: {other:?}"),
    }
}

/// Checks that `out` is `xs` in non-decreasing order.
pub fn sorted_permutation(xs: &[i64], out: &[i64]) -> bool {
    let mut a = xs.to_vec();
    let mut b = out.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    out.windows(2).all(|w| w[0] <= w[1]) && a == b
}

// Validator mutations

fn main_mut(p: &mut PatchProgram) -> &mut ModuleDef {
    &mut p.modules[0]
}

/// Last step of every chain, paired with the chain head.
fn chain_ends(m: &ModuleDef) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    for parent in &m.steps {
        for c in &parent.children {
            let mut cur = c.step.clone();
            let mut guard = 0;
            while let Some(i) = m.steps.iter().position(|s| s.id == cur) {
                guard += 1;
                if guard > m.steps.len() {
                    break;
                }
                match &m.steps[i].next {
                    Some(n) => cur = n.clone(),
                    None => {
                        out.push((i, c.step.clone()));
                        break;
                    }
                }
            }
        }
    }
    out
}

pub fn extra_solid_edge(p: &mut PatchProgram, rng: &mut ChaCha8Rng) -> bool {
    let m = main_mut(p);
    let ends = chain_ends(m);
    let Some(&(end, _)) = ends.choose(rng) else { return false };
    let targets: Vec<String> = m.steps[1..]
        .iter()
        .filter(|s| s.id != m.steps[end].id)
        .map(|s| s.id.clone())
        .collect();
    let Some(t) = targets.choose(rng) else { return false };
    m.steps[end].next = Some(t.clone());
    true
}

pub fn cycle(p: &mut PatchProgram, rng: &mut ChaCha8Rng) -> bool {
    let m = main_mut(p);
    let ends = chain_ends(m);
    let Some((end, head)) = ends.choose(rng).cloned() else { return false };
    m.steps[end].next = Some(head);
    true
}

pub fn duplicate_label(p: &mut PatchProgram, rng: &mut ChaCha8Rng) -> bool {
    let m = main_mut(p);
    let labeled: Vec<usize> = (0..m.steps.len()).filter(|&i| m.steps[i].kind() == StepKind::Labeled).collect();
    let Some(&i) = labeled.choose(rng) else { return false };
    let label = m.steps[i]
        .children
        .iter()
        .find_map(|c| match &c.group {
            Group::Case(v) => Some(v.clone()),
            _ => None,
        })
        .expect("labeled steps have a case");
    let id = format!("{}dup", m.steps[i].id);
    m.steps.push(Step::new(
        id.clone(),
        Payload::Display {
            expr: parse_expr("1").unwrap(),
            to: None,
        },
    ));
    m.steps[i].children.push(ChildEdge {
        group: Group::Case(label),
        step: id,
    });
    true
}

pub fn counter_write(p: &mut PatchProgram, rng: &mut ChaCha8Rng) -> bool {
    let m = main_mut(p);
    let loops: Vec<usize> = (0..m.steps.len()).filter(|&i| m.steps[i].kind() == StepKind::CounterLoop).collect();
    let Some(&i) = loops.choose(rng) else { return false };
    let Payload::CounterLoop { var, .. } = &m.steps[i].payload else { unreachable!() };
    let write = var.to_string();
    let id = format!("{}w", m.steps[i].id);
    let head = m.steps[i].children[0].step.clone();
    let mut s = Step::new(
        id.clone(),
        Payload::Transform {
            target: parse_place(&write).unwrap(),
            expr: parse_expr(&format!("{write} + 1")).unwrap(),
        },
    );
    s.next = Some(head);
    m.steps.push(s);
    m.steps[i].children[0].step = id;
    true
}

pub type Mutation = fn(&mut PatchProgram, &mut ChaCha8Rng) -> bool;

pub const MUTATIONS: [(&str, Mutation); 4] = [
    ("tree-shape", extra_solid_edge),
    ("cycle", cycle),
    ("label-unique", duplicate_label),
    ("counter-write", counter_write),
];

/// Applies each mutation to `per_rule` valid fuzz programs and checks the
/// validator reports the matching rule. Returns how many were rejected.
pub fn mutation_corpus(per_rule: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0;
    for (rule, mutate) in MUTATIONS {
        let mut made = 0;
        let mut program_seed = 0;
        while made < per_rule {
            program_seed += 1;
            if program_seed > 5000 {
                return Err(format!("not enough programs for {rule}"));
            }
            let mut p = fuzz::program(program_seed);
            if !validate(&p).is_empty() {
                return Err(format!("fuzz program {program_seed} is invalid"));
            }
            if !mutate(&mut p, &mut rng) {
                continue;
            }
            let report = validate(&p);
            if !report.has_rule(rule) {
                return Err(format!("seed {program_seed}: expected {rule}, got {:?}", report.rules()));
            }
            made += 1;
        }
        total += made;
    }
    Ok(total)
}

// Resolver

pub const TYPES: [PatchType; 4] = [PatchType::Integer, PatchType::Real, PatchType::Boolean, PatchType::String];

pub fn callee(formals: &[(String, PatchType)]) -> ModuleDef {
    build_module(
        "callee",
        formals
            .iter()
            .map(|(n, t)| DataObjectDecl::caller(n, t.clone()))
            .collect(),
        vec![],
        vec![],
    )
}

/// Every bijection actual -> formal that honours names and types.
pub fn bijections(actuals: &[ActualSig], formals: &[(String, PatchType)]) -> Vec<Vec<usize>> {
    fn go(k: usize, a: &[ActualSig], f: &[(String, PatchType)], used: &mut Vec<bool>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == a.len() {
            out.push(cur.clone());
            return;
        }
        let by_name = a[k]
            .name
            .as_ref()
            .and_then(|n| f.iter().position(|(fname, _)| fname == n.as_str()));
        for j in 0..f.len() {
            if used[j] || !compatible(&a[k].ty, &f[j].1) {
                continue;
            }
            if by_name.is_some_and(|b| b != j) {
                continue;
            }
            // A formal named by some actual is reserved for it.
            let claimed = a.iter().enumerate().any(|(o, x)| {
                o != k && x.name.as_ref().is_some_and(|n| n.as_str() == f[j].0)
            });
            if claimed {
                continue;
            }
            used[j] = true;
            cur.push(j);
            go(k + 1, a, f, used, cur, out);
            cur.pop();
            used[j] = false;
        }
    }
    let mut out = Vec::new();
    go(0, actuals, formals, &mut vec![false; formals.len()], &mut Vec::new(), &mut out);
    out
}

/// Compares the resolver with the bijection oracle on random signatures.
/// Returns which outcomes ("none", "unique", "many") occurred.
pub fn resolver_trials(trials: usize, seed: u64) -> Result<BTreeSet<&'static str>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    for trial in 0..trials {
        let n = rng.gen_range(1..=6);
        let formals: Vec<(String, PatchType)> = (0..n)
            .map(|i| (format!("f{i}"), TYPES[rng.gen_range(0..TYPES.len())].clone()))
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut actuals: Vec<ActualSig> = order
            .iter()
            .map(|&j| {
                let ty = formals[j].1.clone();
                match rng.gen_range(0..4) {
                    0 => ActualSig::named(&formals[j].0, ty),
                    1 => ActualSig::named(&format!("other{j}"), ty),
                    _ => ActualSig::unnamed(ty),
                }
            })
            .collect();
        if rng.gen_bool(0.15) {
            let k = rng.gen_range(0..n);
            actuals[k].ty = TYPES[rng.gen_range(0..TYPES.len())].clone();
        }
        let m = callee(&formals);
        let sig = CallSignature { actuals: actuals.clone() };
        let result = resolve_call(&sig, &m);
        let found = bijections(&actuals, &formals);
        match found.len() {
            0 => {
                match result {
                    Err(e) if e.kind() == "unresolvable" => {}
                    other => return Err(format!("trial {trial}: expected unresolvable, got {other:?}")),
                }
                seen.insert("none");
            }
            1 => {
                let mapping = result.map_err(|e| format!("trial {trial}: {e}"))?;
                let expected: Vec<&str> = found[0].iter().map(|&j| formals[j].0.as_str()).collect();
                let got: Vec<&str> = mapping.formals.iter().map(Ident::as_str).collect();
                if got != expected {
                    return Err(format!("trial {trial}: mapped {got:?}, oracle {expected:?}"));
                }
                seen.insert("unique");

                // Reordering the actuals reorders the mapping the same way.
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                let shuffled = CallSignature {
                    actuals: perm.iter().map(|&k| actuals[k].clone()).collect(),
                };
                let again = resolve_call(&shuffled, &m).map_err(|e| format!("trial {trial}: reordered: {e}"))?;
                for (pos, &k) in perm.iter().enumerate() {
                    if again.formals[pos] != mapping.formals[k] {
                        return Err(format!("trial {trial}: mapping changed under reordering"));
                    }
                }
            }
            _ => {
                match result {
                    Err(e) if e.kind() == "ambiguous-mapping" => {}
                    other => return Err(format!("trial {trial}: expected ambiguous-mapping, got {other:?}")),
                }
                seen.insert("many");
            }
        }
    }
    Ok(seen)
}

// Serialization

pub fn document(seed: u64) -> PatchDocument {
    let mut doc = PatchDocument::new(fuzz::program(seed));
    if seed.is_multiple_of(3) {
        doc.layout = Some(format!("{{\"zoom\": {}, \"nodes\": {{\"1\": [10, 20]}}}}", seed % 7));
    }
    if seed.is_multiple_of(5) {
        doc.extra.insert("author".into(), format!("\"user {seed}\""));
    }
    doc
}

/// parse . serialize is the identity on canonical documents, and both
/// serialization and canonicalization are idempotent.
pub fn round_trip(seed: u64) -> Result<(), String> {
    let doc = document(seed);
    let text = serialize(&doc);
    let back = parse(&text).map_err(|e| format!("seed {seed}: {e}"))?;
    if back != doc.canonicalized() {
        return Err(format!("seed {seed}: parsed document differs"));
    }
    if serialize(&back) != text {
        return Err(format!("seed {seed}: serialization is not idempotent"));
    }
    if back.canonicalized() != back {
        return Err(format!("seed {seed}: canonicalization is not idempotent"));
    }
    Ok(())
}
