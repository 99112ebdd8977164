//! Interpreter against emitted code on the host toolchains. Each test is
//! skipped, with a note on stderr, when the dialect's toolchain is absent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use patch_core::codegen::dialect;
use patch_core::codegen::differential::{differential_check, differential_check_many, ExternalRunner, InputSet};
use patch_core::expr::{parse_expr, parse_place};
use patch_core::fuzz;
use patch_core::ident::Ident;
use patch_core::model::{build_module, DataObjectDecl, PatchProgram, Payload, Tree};
use patch_core::reference::bubble_sort_program;
use patch_core::literal::render_value;
use patch_core::types::PatchType;
use patch_core::value::Value;

fn runner(dialect_id: &str) -> Option<ExternalRunner> {
    let r = ExternalRunner::default();
    if r.available(dialect(dialect_id).unwrap()) {
        Some(r)
    } else {
        eprintln!("skipping {dialect_id}: toolchain not installed");
        None
    }
}

fn list(xs: &[i64]) -> Value {
    Value::List(xs.iter().copied().map(Value::Int).collect())
}

#[test]
fn bubble_sort_agrees_three_ways() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let lists: Vec<Vec<i64>> = (0..100)
        .map(|_| (0..rng.gen_range(0..=20)).map(|_| rng.gen_range(-1000..=1000)).collect())
        .collect();
    let inputs: Vec<InputSet> = lists
        .iter()
        .map(|xs| InputSet::new(vec![(Ident::new("list").unwrap(), list(xs))]))
        .collect();
    let p = bubble_sort_program();
    for d in ["cxx", "py3"] {
        let Some(r) = runner(d) else { continue };
        let report = differential_check(&p, d, &inputs, &r).unwrap();
        assert_eq!(report.verdicts.len(), 100);
        for (v, xs) in report.verdicts.iter().zip(&lists) {
            let mut sorted = xs.clone();
            sorted.sort_unstable();
            let expected = Ok(vec![("list".to_string(), render_value(&list(&sorted)))]);
            assert!(v.agree, "{d}: {v:?}");
            assert_eq!(v.interpreter.result, expected);
            assert_eq!(v.emitted.result, expected);
        }
    }
}

#[test]
fn integer_division_widens() {
    let m = build_module(
        "half",
        vec![],
        vec![DataObjectDecl::caller("x", PatchType::Real)],
        vec![Tree::leaf(Payload::Transform {
            target: parse_place("x").unwrap(),
            expr: parse_expr("1 / 2").unwrap(),
        })],
    );
    let p = PatchProgram {
        entry: m.name.clone(),
        modules: vec![m],
    };
    for d in ["cxx", "py3"] {
        let Some(r) = runner(d) else { continue };
        let report = differential_check(&p, d, &[InputSet::default()], &r).unwrap();
        let v = &report.verdicts[0];
        assert!(v.agree, "{v:?}");
        assert_eq!(v.emitted.result, Ok(vec![("x".to_string(), "0.5".to_string())]));
    }
}

#[test]
fn no_inputs_no_verdicts() {
    // Needs no toolchain: nothing is built when there is nothing to run.
    let r = ExternalRunner::new(std::env::temp_dir().join("patch-never-used"));
    for d in ["cxx", "py3"] {
        let report = differential_check(&bubble_sort_program(), d, &[], &r).unwrap();
        assert!(report.verdicts.is_empty());
    }
}

#[test]
fn fuzzed_programs_agree() {
    let cases: Vec<_> = (1000..1030).map(|s| fuzz::case(s, 5)).collect();
    let refs: Vec<_> = cases.iter().map(|c| (&c.program, c.inputs.as_slice())).collect();
    for d in ["py3", "cxx"] {
        let Some(r) = runner(d) else { continue };
        let report = differential_check_many(&refs, d, &r).unwrap();
        assert_eq!(report.verdicts.len(), 150);
        let bad: Vec<_> = report.divergences().collect();
        assert!(bad.is_empty(), "{d}: {bad:#?}");
    }
}

#[test]
fn runtime_errors_match() {
    let body = vec![
        Tree::leaf(Payload::Transform {
            target: parse_place("ys").unwrap(),
            expr: parse_expr("[1, 2, 3]").unwrap(),
        }),
        Tree::leaf(Payload::Display {
            expr: parse_expr("ys[1]").unwrap(),
            to: None,
        }),
        Tree::leaf(Payload::Display {
            expr: parse_expr("ys[n] + (1 / (n - n))").unwrap(),
            to: None,
        }),
    ];
    let m = build_module("main", vec![DataObjectDecl::caller("n", PatchType::Integer)], vec![], body);
    let p = PatchProgram {
        entry: m.name.clone(),
        modules: vec![m],
    };
    let inputs: Vec<InputSet> = [2, 9]
        .iter()
        .map(|&n| InputSet::new(vec![(Ident::new("n").unwrap(), Value::Int(n))]))
        .collect();
    for d in ["cxx", "py3"] {
        let Some(r) = runner(d) else { continue };
        let report = differential_check(&p, d, &inputs, &r).unwrap();
        assert!(report.all_agree(), "{report:#?}");
        assert_eq!(report.verdicts[0].emitted.displayed, ["1"]);
        assert_eq!(report.verdicts[0].emitted.result, Err("division-by-zero".to_string()));
        assert_eq!(report.verdicts[1].emitted.result, Err("index-out-of-range".to_string()));
    }
}
