//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value as JsonValue};
use tower::ServiceExt;

use patch_core::codegen::differential::{differential_check_many, ExternalRunner};
use patch_core::codegen::{dialect, emit};
use patch_core::expr::{parse_expr, parse_place};
use patch_core::fuzz;
use patch_core::interp::{run_module, ArgValue, RunConfig};
use patch_core::literal::{read_untyped, render_value, render_literal};
use patch_core::model::{build_module, DataObjectDecl, Payload, PatchProgram, Tree};
use patch_core::reference::bubble_sort_program;
use patch_core::serial::{serialize, PatchDocument};
use patch_core::trace::{decode_event, encode_value, EventKind};
use patch_core::types::PatchType;
use patch_core::value::Value;
use patch_service::{router, AppState};

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn ensure(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn within(started: Instant, limit: Duration) -> Result<(), String> {
    let took = started.elapsed();
    ensure(took <= limit, || format!("took {took:.2?}, limit {limit:?}"))
}

fn transform(target: &str, expr: &str) -> Tree {
    Tree::leaf(Payload::Transform {
        target: parse_place(target).unwrap(),
        expr: parse_expr(expr).unwrap(),
    })
}

fn display(expr: &str) -> Tree {
    Tree::leaf(Payload::Display {
        expr: parse_expr(expr).unwrap(),
        to: None,
    })
}

fn program(m: patch_core::model::ModuleDef) -> PatchProgram {
    PatchProgram {
        entry: m.name.clone(),
        modules: vec![m],
    }
}

fn worked_examples() -> Check {
    let started = Instant::now();
    let p = program(build_module(
        "main",
        vec![],
        vec![],
        vec![
            transform("x", r#"["Moscow", "Java", "Pea"]"#),
            transform("y", r#"<no: 2, street: "Main Road", city: "New York", zip: 10026>"#),
            display("x[3]"),
            display("y[4]"),
            display("y.zip"),
            display("2 + 3.57"),
            display("45 + 3"),
        ],
    ));
    let ex = run_module(&p, &p.entry, vec![], vec![], RunConfig::default());
    ex.result.map_err(|e| e.to_string())?;
    let shown: Vec<String> = ex.displayed.iter().map(render_value).collect();
    let expected = [r#""Pea""#, "10026", "10026", "5.57", "48"];
    ensure(shown == expected, || format!("displayed {shown:?}"))?;
    ensure(ex.displayed[3] == Value::Real(5.57) && ex.displayed[4] == Value::Int(48), || {
        format!("sum types {:?}", &ex.displayed[3..])
    })?;

    let coerce = program(build_module(
        "main",
        vec![
            DataObjectDecl::caller("n", PatchType::Integer),
            DataObjectDecl::caller("r", PatchType::Real),
        ],
        vec![
            DataObjectDecl::caller("n", PatchType::Integer),
            DataObjectDecl::caller("r", PatchType::Real),
        ],
        vec![transform("n", "5.57"), transform("r", "48")],
    ));
    let args = vec![ArgValue::named("n", Value::Int(0)), ArgValue::named("r", Value::Real(0.0))];
    let out = run_module(&coerce, &coerce.entry, args, vec![], RunConfig::default())
        .result
        .map_err(|e| e.to_string())?
        .outputs;
    ensure(out[0].1 == Value::Int(5), || format!("5.57 assigned to integer gave {:?}", out[0].1))?;
    ensure(out[1].1 == Value::Real(48.0) && render_literal(&out[1].1) == "48.0", || {
        format!("48 assigned to real gave {:?}", out[1].1)
    })?;
    within(started, Duration::from_secs(1))?;
    Ok(format!("7 examples in {:.2?}", started.elapsed()))
}

fn inversions(xs: &[i64]) -> usize {
    let mut n = 0;
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            if xs[i] > xs[j] {
                n += 1;
            }
        }
    }
    n
}

fn bubble_sort_end_to_end() -> Check {
    let started = Instant::now();
    let input = [29, -4, 2, 17, 45, 9];
    let p = bubble_sort_program();
    let steps = p.modules[0].steps.len() - 1;
    ensure(steps == 8, || format!("{steps} steps below the root"))?;
    let list = Value::List(input.iter().copied().map(Value::Int).collect());
    let ex = run_module(&p, &p.entry, vec![ArgValue::named("list", list)], vec![], RunConfig::default());
    let out = ex.result.map_err(|e| e.to_string())?;
    let mut oracle = input.to_vec();
    oracle.sort();
    let expected = Value::List(oracle.iter().copied().map(Value::Int).collect());
    ensure(out.outputs[0].1 == expected, || format!("sorted to {}", render_value(&out.outputs[0].1)))?;

    // Replay the swaps of the first pass of the counter loop.
    let first_pass_end = ex
        .trace
        .iter()
        .find(|e| e.step == "4" && e.kind == EventKind::ExitStep)
        .map(|e| e.seq)
        .ok_or("no pass completed")?;
    let mut replay = input.to_vec();
    let mut swaps = 0;
    for ev in &ex.trace {
        if let EventKind::Swap {
            i: Some(i), j: Some(j), ..
        } = ev.kind
        {
            if ev.seq < first_pass_end {
                replay.swap(i as usize - 1, j as usize - 1);
            }
            swaps += 1;
        }
    }
    ensure(replay[5] == 45, || format!("after the first pass: {replay:?}"))?;
    let inv = inversions(&input);
    ensure(swaps == inv, || format!("{swaps} swaps, {inv} inversions"))?;
    within(started, Duration::from_secs(1))?;
    Ok(format!("swaps={swaps} inversions={inv}, max at position 6 after pass 1"))
}

fn sorting_property() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    for case in 0..500 {
        let len = rng.gen_range(0..=50);
        let xs: Vec<i64> = (0..len).map(|_| rng.gen_range(-1_000_000..=1_000_000)).collect();
        let out = support::sort_with_interpreter(&xs);
        ensure(support::sorted_permutation(&xs, &out), || format!("case {case}: {xs:?} -> {out:?}"))?;
    }
    within(started, Duration::from_secs(10))?;
    Ok(format!("500 lists in {:.2?}", started.elapsed()))
}

fn validator() -> Check {
    let rejected = support::mutation_corpus(50, 99)?;
    ensure(rejected == 200, || format!("{rejected} rejected"))?;
    Ok("200/200 mutations rejected with the expected rule".into())
}

fn resolver() -> Check {
    let seen = support::resolver_trials(1000, 7)?;
    ensure(seen.contains("many"), || format!("no ambiguous case among {seen:?}"))?;
    Ok(format!("1000 trials, outcomes {seen:?}"))
}

fn serialization() -> Check {
    for seed in 0..1000 {
        support::round_trip(seed)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10_000 {
        let x: f64 = f64::from_bits(rng.gen::<u64>());
        if !x.is_finite() {
            continue;
        }
        let text = render_value(&Value::Real(x));
        let Ok(Value::Real(y)) = read_untyped(&text) else {
            return Err(format!("{text} does not read back as a real"));
        };
        ensure(x == y || (x - y).abs() <= 1e-12 * x.abs().max(y.abs()), || format!("{x} -> {y}"))?;
    }
    Ok("1000 documents, 10000 reals".into())
}

fn goldens() -> Result<(), String> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden");
    for (d, file) in [("cxx", "bubble_sort.cpp"), ("py3", "bubble_sort.py")] {
        let stored = std::fs::read_to_string(dir.join(file)).map_err(|e| format!("{file}: {e}"))?;
        let text = emit(&bubble_sort_program(), d).map_err(|e| e.to_string())?.full();
        ensure(stored == text, || format!("{file} differs from emitted text"))?;
    }
    Ok(())
}

fn equivalence() -> Check {
    let started = Instant::now();
    goldens()?;
    let runner = ExternalRunner::default();
    let missing: Vec<&str> = ["cxx", "py3"]
        .into_iter()
        .filter(|d| !runner.available(dialect(d).unwrap()))
        .collect();
    if !missing.is_empty() {
        within(started, Duration::from_secs(5))?;
        return Ok(format!("goldens only, toolchains missing for {missing:?}"));
    }
    let cases: Vec<_> = (0..100).map(|s| fuzz::case(s, 10)).collect();
    let refs: Vec<_> = cases.iter().map(|c| (&c.program, c.inputs.as_slice())).collect();
    let mut summary = Vec::new();
    for d in ["cxx", "py3"] {
        let report = differential_check_many(&refs, d, &runner).map_err(|e| format!("{d}: {e}"))?;
        let agree = report.verdicts.iter().filter(|v| v.agree).count();
        ensure(report.verdicts.len() == 1000 && report.all_agree(), || {
            format!("{d}: agree={agree}/{}", report.verdicts.len())
        })?;
        summary.push(format!("{d} agree={agree}/1000"));
    }
    within(started, Duration::from_secs(300))?;
    Ok(format!("{}, goldens match, {:.1?}", summary.join(", "), started.elapsed()))
}

async fn call(state: &Arc<AppState>, method: &str, uri: &str, body: String) -> Result<(StatusCode, String), String> {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .body(Body::from(body))
        .map_err(|e| e.to_string())?;
    let resp = router(Arc::clone(state)).oneshot(req).await.map_err(|e| e.to_string())?;
    let status = resp.status();
    let bytes = resp.into_body().collect().await.map_err(|e| e.to_string())?.to_bytes();
    Ok((status, String::from_utf8_lossy(&bytes).into_owned()))
}

fn json_of(text: &str) -> Result<JsonValue, String> {
    serde_json::from_str(text).map_err(|e| format!("{e}: {text}"))
}

async fn service_parity() -> Check {
    let state = AppState::new();
    let doc = serialize(&PatchDocument::new(bubble_sort_program()));
    let (status, _) = call(&state, "PUT", "/documents/bs", doc).await?;
    ensure(status == StatusCode::OK, || format!("PUT gave {status}"))?;

    let input = "[29, -4, 2, 17, 45, 9]";
    let body = json!({ "inputs": { "list": input } }).to_string();
    let (status, text) = call(&state, "POST", "/documents/bs/runs", body).await?;
    ensure(status == StatusCode::CREATED, || format!("run gave {status}: {text}"))?;
    let sid = json_of(&text)?["session"].as_str().unwrap_or_default().to_string();
    let (_, feed) = call(&state, "GET", &format!("/runs/{sid}/events"), String::new()).await?;

    let mut wire = Vec::new();
    let mut ended = false;
    for block in feed.split("\n\n").filter(|b| !b.trim().is_empty()) {
        let event = block.lines().find_map(|l| l.strip_prefix("event:")).map(str::trim);
        let data: String = block
            .lines()
            .filter_map(|l| l.strip_prefix("data:"))
            .map(|d| d.strip_prefix(' ').unwrap_or(d))
            .collect();
        match event {
            Some("trace") => wire.push(decode_event(&json_of(&data)?).map_err(|e| e.0)?),
            Some("end") => ended = true,
            _ => {}
        }
    }
    ensure(ended, || "feed has no end event".into())?;
    let session = state.session(&sid).ok_or("session vanished")?;
    let (recorded, finished) = session.snapshot_from(0);
    ensure(finished && wire == recorded, || "wire feed differs from the session trace".into())?;

    let p = bubble_sort_program();
    let list = read_untyped(input).map_err(|e| e.to_string())?;
    let local = run_module(&p, &p.entry, vec![ArgValue::named("list", list)], vec![], RunConfig::default());
    ensure(wire == local.trace, || "wire feed differs from an in-process run".into())?;
    let outputs = local.result.map_err(|e| e.to_string())?.outputs;

    let last = p.modules[0].reading_order().last().map(|s| s.id.clone()).unwrap_or_default();
    let body = json!({ "inputs": { "list": input }, "step": last }).to_string();
    let (status, text) = call(&state, "POST", "/documents/bs/preview", body).await?;
    ensure(status == StatusCode::OK, || format!("preview gave {status}: {text}"))?;
    let preview = json_of(&text)?;
    ensure(preview["outputs"]["list"] == encode_value(&outputs[0].1), || {
        format!("preview outputs {}", preview["outputs"])
    })?;
    Ok(format!("{} events over the wire, preview matches run", wire.len()))
}

fn main() -> ExitCode {
    let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
    let criteria: Vec<Criterion> = vec![
        ("worked examples", Box::new(worked_examples)),
        ("bubble sort end to end", Box::new(bubble_sort_end_to_end)),
        ("sorting property", Box::new(sorting_property)),
        ("validator mutations", Box::new(validator)),
        ("resolver properties", Box::new(resolver)),
        ("serialization round trip", Box::new(serialization)),
        ("emitted code equivalence", Box::new(equivalence)),
        ("service parity", Box::new(|| rt.block_on(service_parity()))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
