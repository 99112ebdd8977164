//! Local HTTP service for the Patch editor.
//!
//! Documents live in memory under caller-chosen ids. Runs execute on their
//! own threads against a snapshot of the document taken when the run
//! starts; their trace is served as server-sent events.

use std::collections::HashMap;
use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use futures::Stream;
use serde::Deserialize;
use serde_json::{json, Value as JsonValue};
use tokio::sync::watch;

use patch_core::codegen::{self, SourceText};
use patch_core::ident::Ident;
use patch_core::interp::{run_module, ArgValue, RunConfig};
use patch_core::literal::read_value;
use patch_core::model::{ModuleDef, PatchProgram};
use patch_core::resolver::{resolve_call, ActualSig, CallSignature};
use patch_core::serial::{parse, serialize, PatchDocument, SerialError};
use patch_core::stream::{start_run, RunRequest, SessionHub, TraceSession};
use patch_core::trace::encode_event;
use patch_core::validate::{validate, ValidationReport};
use patch_core::value::type_of;

pub const DEFAULT_PORT: u16 = 7341;

struct RunEntry {
    session: Arc<TraceSession>,
    changes: watch::Sender<u64>,
}

#[derive(Default)]
pub struct AppState {
    documents: Mutex<HashMap<String, Arc<PatchDocument>>>,
    hub: SessionHub,
    runs: Mutex<HashMap<String, RunEntry>>,
}

impl AppState {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    fn document(&self, id: &str) -> Result<Arc<PatchDocument>, ApiError> {
        self.documents
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("unknown-document", format!("no document {id}")))
    }

    /// The trace session behind `sid`, for in-process inspection.
    pub fn session(&self, sid: &str) -> Option<Arc<TraceSession>> {
        self.hub.get(sid).ok()
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: String,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            kind: kind.to_string(),
            message: message.into(),
        }
    }

    fn bad_request(kind: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, kind, message)
    }

    fn not_found(kind: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, kind, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "kind": self.kind, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/documents/{id}", put(put_document).get(get_document))
        .route("/documents/{id}/runs", post(start))
        .route("/documents/{id}/emit", post(emit))
        .route("/documents/{id}/preview", post(preview))
        .route("/runs/{sid}", get(run_status))
        .route("/runs/{sid}/events", get(events))
        .route("/runs/{sid}/stop", post(stop))
        .with_state(state)
}

/// Serves the API on `addr` until the process ends.
pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new())).await
}

pub fn report_json(report: &ValidationReport) -> JsonValue {
    json!(report
        .findings
        .iter()
        .map(|f| json!({ "module": f.module, "step": f.step, "rule": f.rule, "message": f.message }))
        .collect::<Vec<_>>())
}

async fn put_document(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: String) -> ApiResult<Response> {
    let doc = match parse(&body) {
        Ok(doc) => doc,
        Err(e) => {
            let mut detail = json!({ "kind": e.kind(), "message": e.to_string() });
            if let SerialError::Parse { line, column, .. } = &e {
                detail["line"] = json!(line);
                detail["column"] = json!(column);
            }
            return Ok((StatusCode::BAD_REQUEST, Json(json!({ "error": detail }))).into_response());
        }
    };
    let doc = doc.canonicalized();
    let report = validate(&doc.program);
    state
        .documents
        .lock()
        .unwrap_or_else(|p| p.into_inner())
        .insert(id.clone(), Arc::new(doc));
    Ok(Json(json!({ "id": id, "report": report_json(&report) })).into_response())
}

async fn get_document(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let doc = state.document(&id)?;
    Ok(([("content-type", "application/json")], serialize(&doc)).into_response())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunBody {
    module: Option<String>,
    /// Input name to value in canonical value syntax.
    #[serde(default)]
    inputs: HashMap<String, String>,
    #[serde(default)]
    console: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PreviewBody {
    module: Option<String>,
    #[serde(default)]
    inputs: HashMap<String, String>,
    #[serde(default)]
    console: Vec<String>,
    #[serde(alias = "prefixStepId", alias = "prefix-step-id")]
    step: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmitBody {
    dialect: String,
    module: Option<String>,
}

fn body<T: serde::de::DeserializeOwned>(text: &str) -> ApiResult<T> {
    serde_json::from_str(text).map_err(|e| ApiError::bad_request("malformed-request", e.to_string()))
}

/// The runnable program of a valid document.
fn valid_program(doc: &PatchDocument) -> ApiResult<Arc<PatchProgram>> {
    let report = validate(&doc.program);
    if let Some(f) = report.findings.first() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "invalid-document",
            format!("{} findings, first: {f}", report.findings.len()),
        ));
    }
    Ok(Arc::new(doc.program.clone()))
}

fn pick_module<'p>(program: &'p PatchProgram, name: Option<&str>) -> ApiResult<&'p ModuleDef> {
    let Some(name) = name else {
        return program
            .entry_module()
            .ok_or_else(|| ApiError::not_found("unknown-module", "the document has no entry module"));
    };
    Ident::new(name)
        .ok()
        .and_then(|n| program.module(&n))
        .ok_or_else(|| ApiError::not_found("unknown-module", format!("no module {name}")))
}

/// Parses the inputs against the module's declared types and checks that
/// they bind to its formals.
fn arguments(m: &ModuleDef, inputs: &HashMap<String, String>) -> ApiResult<Vec<ArgValue>> {
    let mut names: Vec<&String> = inputs.keys().collect();
    names.sort();
    let mut args = Vec::new();
    for name in names {
        let text = &inputs[name];
        let ident = Ident::new(name).map_err(|e| ApiError::bad_request("malformed-request", e.to_string()))?;
        let value = match m.input(&ident) {
            Some(d) => read_value(text, &d.ty),
            None => patch_core::literal::read_untyped(text),
        }
        .map_err(|e| ApiError::bad_request(e.kind(), format!("input {name}: {e}")))?;
        args.push(ArgValue::named(name, value));
    }
    let sig = CallSignature {
        actuals: args
            .iter()
            .map(|a| ActualSig {
                name: a.name.clone(),
                ty: type_of(&a.value),
            })
            .collect(),
    };
    resolve_call(&sig, m).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.kind(), e.to_string()))?;
    Ok(args)
}

async fn start(State(state): State<Arc<AppState>>, Path(id): Path<String>, text: String) -> ApiResult<Response> {
    let req: RunBody = if text.trim().is_empty() { RunBody::default() } else { body(&text)? };
    let doc = state.document(&id)?;
    let program = valid_program(&doc)?;
    let m = pick_module(&program, req.module.as_deref())?;
    let args = arguments(m, &req.inputs)?;
    let module = m.name.clone();

    let session = state.hub.create();
    let (changes, _) = watch::channel(0u64);
    let notify = changes.clone();
    session.on_change(move || {
        notify.send_modify(|n| *n += 1);
    });
    let sid = session.id().to_string();
    state.runs.lock().unwrap_or_else(|p| p.into_inner()).insert(
        sid.clone(),
        RunEntry {
            session: Arc::clone(&session),
            changes,
        },
    );
    start_run(
        session,
        RunRequest {
            program,
            module,
            args,
            console: req.console,
            config: RunConfig::default(),
        },
    );
    Ok((StatusCode::CREATED, Json(json!({ "session": sid }))).into_response())
}

fn run_entry(state: &AppState, sid: &str) -> ApiResult<(Arc<TraceSession>, watch::Receiver<u64>)> {
    let runs = state.runs.lock().unwrap_or_else(|p| p.into_inner());
    runs.get(sid)
        .map(|e| (Arc::clone(&e.session), e.changes.subscribe()))
        .ok_or_else(|| ApiError::not_found("unknown-session", format!("no session {sid}")))
}

async fn run_status(State(state): State<Arc<AppState>>, Path(sid): Path<String>) -> ApiResult<Json<JsonValue>> {
    let (session, _) = run_entry(&state, &sid)?;
    Ok(Json(session.summary().to_json()))
}

#[derive(Debug, Deserialize)]
struct FromQuery {
    from: Option<u64>,
}

/// `trace` events carry one encoded trace event each (the SSE id is its
/// sequence number); a final `end` event carries the run summary.
async fn events(
    State(state): State<Arc<AppState>>,
    Path(sid): Path<String>,
    Query(q): Query<FromQuery>,
    headers: HeaderMap,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let (session, changes) = run_entry(&state, &sid)?;
    let resume = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<u64>().ok())
        .map(|seq| seq + 1);
    let start = q.from.or(resume).unwrap_or(0);
    let feed = futures::stream::unfold(
        Some((session, changes, start, Vec::<Event>::new().into_iter())),
        |st| async move {
            let (session, mut changes, mut next, mut pending) = st?;
            loop {
                if let Some(ev) = pending.next() {
                    return Some((Ok(ev), Some((session, changes, next, pending))));
                }
                changes.borrow_and_update();
                let (batch, finished) = session.snapshot_from(next);
                if !batch.is_empty() {
                    next = batch.last().map_or(next, |e| e.seq + 1);
                    pending = batch
                        .iter()
                        .map(|e| {
                            Event::default()
                                .event("trace")
                                .id(e.seq.to_string())
                                .data(encode_event(e).to_string())
                        })
                        .collect::<Vec<_>>()
                        .into_iter();
                    continue;
                }
                if finished {
                    let end = Event::default().event("end").data(session.summary().to_json().to_string());
                    return Some((Ok(end), None));
                }
                if changes.changed().await.is_err() {
                    return None;
                }
            }
        },
    );
    Ok(Sse::new(feed).keep_alive(KeepAlive::default()))
}

async fn stop(State(state): State<Arc<AppState>>, Path(sid): Path<String>) -> ApiResult<Json<JsonValue>> {
    let (session, _) = run_entry(&state, &sid)?;
    session.request_stop();
    Ok(Json(json!({ "session": sid, "status": session.status().as_str() })))
}

pub fn source_json(src: &SourceText) -> JsonValue {
    json!({
        "dialect": src.dialect,
        "fileName": src.file_name,
        "text": src.text,
        "entrySymbol": src.entry_symbol,
        "harness": src.harness,
        "runtime": { "name": src.runtime.name, "text": src.runtime.text },
    })
}

async fn emit(State(state): State<Arc<AppState>>, Path(id): Path<String>, text: String) -> ApiResult<Json<JsonValue>> {
    let req: EmitBody = body(&text)?;
    let doc = state.document(&id)?;
    let program = valid_program(&doc)?;
    let m = pick_module(&program, req.module.as_deref())?;
    let src = codegen::emit_module(&program, &m.name, &req.dialect).map_err(|e| match e {
        codegen::CodegenError::UnknownDialect(_) => ApiError::bad_request(e.kind(), e.to_string()),
        codegen::CodegenError::InvalidProgram(_) => ApiError::new(StatusCode::CONFLICT, e.kind(), e.to_string()),
        codegen::CodegenError::Unsupported(_) => {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.kind(), e.to_string())
        }
    })?;
    Ok(Json(source_json(&src)))
}

async fn preview(State(state): State<Arc<AppState>>, Path(id): Path<String>, text: String) -> ApiResult<Json<JsonValue>> {
    let req: PreviewBody = body(&text)?;
    let doc = state.document(&id)?;
    let program = valid_program(&doc)?;
    let m = pick_module(&program, req.module.as_deref())?;
    if m.step(&req.step).is_none() {
        return Err(ApiError::not_found("unknown-step", format!("{} has no step {}", m.name, req.step)));
    }
    let args = arguments(m, &req.inputs)?;
    let module = m.name.clone();
    let cfg = RunConfig {
        inert_after: Some(req.step.clone()),
        ..RunConfig::default()
    };
    let console = req.console;
    let exec = tokio::task::spawn_blocking(move || run_module(&program, &module, args, console, cfg))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
    let displayed: Vec<JsonValue> = exec.displayed.iter().map(patch_core::trace::encode_value).collect();
    let body = match exec.result {
        Ok(r) => json!({
            "step": req.step,
            "outputs": r.outputs.iter().map(|(k, v)| (k.to_string(), patch_core::trace::encode_value(v))).collect::<serde_json::Map<_, _>>(),
            "state": r.state.iter().map(|(k, v)| (k.to_string(), patch_core::trace::encode_value(v))).collect::<serde_json::Map<_, _>>(),
            "displayed": displayed,
            "error": null,
        }),
        Err(e) => json!({
            "step": req.step,
            "outputs": {},
            "state": {},
            "displayed": displayed,
            "error": { "kind": e.kind, "message": e.message, "module": e.module, "step": e.step },
        }),
    };
    Ok(Json(body))
}
