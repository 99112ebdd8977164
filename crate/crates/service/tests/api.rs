use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value as JsonValue};
use tower::ServiceExt;

use patch_core::interp::{run_module, ArgValue, RunConfig};
use patch_core::literal::read_untyped;
use patch_core::model::Payload;
use patch_core::reference::bubble_sort_program;
use patch_core::serial::{serialize, PatchDocument};
use patch_core::trace::{decode_event, encode_value};
use patch_service::{router, AppState};

async fn call(state: &Arc<AppState>, method: &str, uri: &str, body: &str) -> (StatusCode, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = router(Arc::clone(state)).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn parsed(text: &str) -> JsonValue {
    serde_json::from_str(text).unwrap_or_else(|e| panic!("{e}: {text}"))
}

async fn with_bubble_sort() -> Arc<AppState> {
    let state = AppState::new();
    let doc = serialize(&PatchDocument::new(bubble_sort_program()));
    let (status, body) = call(&state, "PUT", "/documents/bs", &doc).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(parsed(&body)["report"], json!([]));
    state
}

struct SseEvent {
    event: String,
    id: Option<String>,
    data: String,
}

fn sse(text: &str) -> Vec<SseEvent> {
    text.split("\n\n")
        .filter(|b| !b.trim().is_empty())
        .filter_map(|block| {
            let mut ev = SseEvent {
                event: "message".into(),
                id: None,
                data: String::new(),
            };
            let mut any = false;
            for line in block.lines() {
                if let Some(v) = line.strip_prefix("event:") {
                    ev.event = v.trim().into();
                    any = true;
                } else if let Some(v) = line.strip_prefix("id:") {
                    ev.id = Some(v.trim().into());
                } else if let Some(v) = line.strip_prefix("data:") {
                    ev.data.push_str(v.strip_prefix(' ').unwrap_or(v));
                    any = true;
                }
            }
            any.then_some(ev)
        })
        .collect()
}

#[tokio::test]
async fn wire_feed_equals_in_process_trace() {
    let state = with_bubble_sort().await;
    let (status, body) = call(
        &state,
        "POST",
        "/documents/bs/runs",
        r#"{"inputs": {"list": "[29, -4, 2, 17, 45, 9]"}}"#,
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let sid = parsed(&body)["session"].as_str().unwrap().to_string();

    let (status, text) = call(&state, "GET", &format!("/runs/{sid}/events"), "").await;
    assert_eq!(status, StatusCode::OK);
    let events = sse(&text);
    let (last, trace) = events.split_last().unwrap();
    assert_eq!(last.event, "end");
    let summary = parsed(&last.data);
    assert_eq!(summary["status"], "completed");

    let session = state.session(&sid).unwrap();
    let (recorded, finished) = session.snapshot_from(0);
    assert!(finished);
    let decoded: Vec<_> = trace
        .iter()
        .map(|e| {
            assert_eq!(e.event, "trace");
            decode_event(&parsed(&e.data)).unwrap()
        })
        .collect();
    assert_eq!(decoded, recorded);
    for (e, ev) in trace.iter().zip(&recorded) {
        assert_eq!(e.id.as_deref(), Some(ev.seq.to_string().as_str()));
    }

    let p = bubble_sort_program();
    let input = read_untyped("[29, -4, 2, 17, 45, 9]").unwrap();
    let local = run_module(&p, &p.entry, vec![ArgValue::named("list", input)], vec![], RunConfig::default());
    assert_eq!(decoded, local.trace);
    let sorted = read_untyped("[-4, 2, 9, 17, 29, 45]").unwrap();
    assert_eq!(local.result.unwrap().outputs[0].1, sorted);

    let (status, body) = call(&state, "GET", &format!("/runs/{sid}"), "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(parsed(&body), summary);
}

#[tokio::test]
async fn resuming_from_a_sequence_number() {
    let state = with_bubble_sort().await;
    let (_, body) = call(&state, "POST", "/documents/bs/runs", r#"{"inputs": {"list": "[3, 1, 2]"}}"#).await;
    let sid = parsed(&body)["session"].as_str().unwrap().to_string();
    let (_, all) = call(&state, "GET", &format!("/runs/{sid}/events"), "").await;
    let (_, tail) = call(&state, "GET", &format!("/runs/{sid}/events?from=5"), "").await;
    let all = sse(&all);
    let tail = sse(&tail);
    assert_eq!(tail.len(), all.len() - 4);
    assert_eq!(tail[0].id.as_deref(), Some("5"));
}

#[tokio::test]
async fn preview_of_the_whole_tree_equals_the_run() {
    let state = with_bubble_sort().await;
    let p = bubble_sort_program();
    let m = p.entry_module().unwrap();
    let last = m.reading_order().last().unwrap().id.clone();
    let input = "[29, -4, 2, 17, 45, 9]";
    let req = json!({ "inputs": { "list": input }, "step": last });
    let (status, body) = call(&state, "POST", "/documents/bs/preview", &req.to_string()).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let preview = parsed(&body);

    let run = run_module(
        &p,
        &p.entry,
        vec![ArgValue::named("list", read_untyped(input).unwrap())],
        vec![],
        RunConfig::default(),
    );
    let outputs = run.result.unwrap().outputs;
    assert_eq!(preview["outputs"]["list"], encode_value(&outputs[0].1));
    assert_eq!(preview["error"], JsonValue::Null);
}

#[tokio::test]
async fn preview_after_step_three() {
    let state = with_bubble_sort().await;
    let req = json!({ "inputs": { "list": "[29, -4, 2, 17, 45, 9]" }, "prefixStepId": "3" });
    let (status, body) = call(&state, "POST", "/documents/bs/preview", &req.to_string()).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let v = parsed(&body);
    let list = encode_value(&read_untyped("[29, -4, 2, 17, 45, 9]").unwrap());
    assert_eq!(v["state"]["list"], list);
    assert_eq!(v["state"]["sorted"], encode_value(&read_untyped("TRUE").unwrap()));
    assert!(v["state"].get("i").is_none());
}

#[tokio::test]
async fn invalid_documents_are_data_until_run() {
    let state = AppState::new();
    let mut p = bubble_sort_program();
    // Reading a variable nobody writes.
    let step = p.modules[0].steps.iter_mut().find(|s| s.id == "1").unwrap();
    if let Payload::Transform { expr, .. } = &mut step.payload {
        *expr = patch_core::expr::parse_expr("LEN nowhere < 2").unwrap();
    }
    let doc = serialize(&PatchDocument::new(p));
    let (status, body) = call(&state, "PUT", "/documents/bad", &doc).await;
    assert_eq!(status, StatusCode::OK);
    assert!(!parsed(&body)["report"].as_array().unwrap().is_empty());

    let (status, body) = call(&state, "POST", "/documents/bad/runs", r#"{"inputs": {"list": "[1]"}}"#).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    assert_eq!(parsed(&body)["error"]["kind"], "invalid-document");
}

#[tokio::test]
async fn error_statuses() {
    let state = with_bubble_sort().await;
    let (status, body) = call(&state, "PUT", "/documents/x", "{ not json").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let err = &parsed(&body)["error"];
    assert_eq!(err["kind"], "parse-error");
    assert!(err["line"].is_u64() && err["column"].is_u64());

    let (status, _) = call(&state, "GET", "/documents/missing", "").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&state, "POST", "/documents/missing/runs", "{}").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&state, "GET", "/runs/run-999/events", "").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&state, "POST", "/runs/run-999/stop", "").await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, _) = call(&state, "POST", "/documents/bs/runs", r#"{"inputs": {"list": "\"text\""}}"#).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, body) = call(
        &state,
        "POST",
        "/documents/bs/runs",
        r#"{"inputs": {"list": "[1]", "extra": "2"}}"#,
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    let (status, _) = call(&state, "POST", "/documents/bs/runs", r#"{"bogus": 1}"#).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&state, "POST", "/documents/bs/emit", r#"{"dialect": "cobol"}"#).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(
        &state,
        "POST",
        "/documents/bs/preview",
        r#"{"inputs": {"list": "[1]"}, "step": "99"}"#,
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn documents_round_trip_and_emit() {
    let state = with_bubble_sort().await;
    let (status, body) = call(&state, "GET", "/documents/bs", "").await;
    assert_eq!(status, StatusCode::OK);
    let back = patch_core::serial::parse(&body).unwrap();
    assert_eq!(back.program, PatchDocument::new(bubble_sort_program()).canonicalized().program);

    let (status, body) = call(&state, "POST", "/documents/bs/emit", r#"{"dialect": "py3"}"#).await;
    assert_eq!(status, StatusCode::OK);
    let src = parsed(&body);
    assert_eq!(src["fileName"], "main.py");
    assert_eq!(src["entrySymbol"], "m_bubblesort");
    assert_eq!(
        src["text"].as_str().unwrap(),
        patch_core::codegen::emit(&back.program, "py3").unwrap().text
    );
}

#[tokio::test]
async fn stopping_a_finished_run_keeps_its_status() {
    let state = with_bubble_sort().await;
    let (_, body) = call(&state, "POST", "/documents/bs/runs", r#"{"inputs": {"list": "[2, 1]"}}"#).await;
    let sid = parsed(&body)["session"].as_str().unwrap().to_string();
    state.session(&sid).unwrap().wait();
    let (status, body) = call(&state, "POST", &format!("/runs/{sid}/stop"), "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(parsed(&body)["status"], "completed");
}
