//! Execution trace events and their JSON wire form.
//!
//! On the wire every value is an object `{"type": ..., "value": ...}` whose
//! `value` is the canonical literal text, so decoding is exact.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value as Json};
use thiserror::Error;

use crate::ident::Ident;
use crate::literal::{read_value, render_value};
use crate::model::StepId;
use crate::ops::BinaryOp;
use crate::types::PatchType;
use crate::value::{type_of, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    Enter,
    ExitStep,
    Assign {
        var: Ident,
        target: String,
        old: Option<Value>,
        new: Value,
    },
    Transform {
        var: Ident,
        target: String,
        old: Option<Value>,
        new: Value,
    },
    Compare {
        lhs: Value,
        rhs: Value,
        op: BinaryOp,
        result: bool,
    },
    /// Exchange of two places. `container`, `i` and `j` are set when both
    /// places are elements of the same list.
    Swap {
        left: String,
        right: String,
        container: Option<Ident>,
        i: Option<i64>,
        j: Option<i64>,
    },
    Read {
        var: Ident,
        value: Value,
    },
    Display {
        value: Value,
        to: Option<Ident>,
    },
    LoopIter {
        iteration: u64,
    },
    Exited,
    Stopped,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Enter => "enter",
            EventKind::ExitStep => "exit-step",
            EventKind::Assign { .. } => "assign",
            EventKind::Transform { .. } => "transform",
            EventKind::Compare { .. } => "compare",
            EventKind::Swap { .. } => "swap",
            EventKind::Read { .. } => "read",
            EventKind::Display { .. } => "display",
            EventKind::LoopIter { .. } => "loop-iter",
            EventKind::Exited => "exited",
            EventKind::Stopped => "stopped",
        }
    }

    /// Variable whose value this event changes, if any.
    pub fn mutated_var(&self) -> Option<&Ident> {
        match self {
            EventKind::Assign { var, .. } | EventKind::Transform { var, .. } | EventKind::Read { var, .. } => {
                Some(var)
            }
            _ => None,
        }
    }
}

pub type Snapshot = BTreeMap<Ident, Value>;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub seq: u64,
    pub module: Ident,
    pub step: StepId,
    pub kind: EventKind,
    pub snapshot: Option<Snapshot>,
}

/// Value history of `var` as recorded in snapshots: one entry per change.
pub fn watch(trace: &[TraceEvent], var: &Ident) -> Vec<(u64, Value)> {
    let mut out: Vec<(u64, Value)> = Vec::new();
    for ev in trace {
        let Some(v) = ev.snapshot.as_ref().and_then(|s| s.get(var)) else { continue };
        if out.last().is_none_or(|(_, last)| last != v) {
            out.push((ev.seq, v.clone()));
        }
    }
    out
}

/// Event counts by kind name.
pub fn summarize(trace: &[TraceEvent]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for ev in trace {
        *counts.entry(ev.kind.name().to_string()).or_insert(0) += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bad trace event: {0}")]
pub struct WireError(pub String);

pub fn encode_value(v: &Value) -> Json {
    json!({ "type": type_of(v).to_string(), "value": render_value(v) })
}

pub fn decode_value(j: &Json) -> Result<Value, WireError> {
    let ty = j
        .get("type")
        .and_then(Json::as_str)
        .ok_or_else(|| WireError("value without type".into()))?;
    let text = j
        .get("value")
        .and_then(Json::as_str)
        .ok_or_else(|| WireError("value without text".into()))?;
    let ty: PatchType = ty.parse().map_err(|e| WireError(format!("{e}")))?;
    read_value(text, &ty).map_err(|e| WireError(e.to_string()))
}

fn opt_value(v: &Option<Value>) -> Json {
    v.as_ref().map_or(Json::Null, encode_value)
}

pub fn encode_event(ev: &TraceEvent) -> Json {
    let mut o = Map::new();
    o.insert("seq".into(), json!(ev.seq));
    o.insert("module".into(), json!(ev.module.as_str()));
    o.insert("step".into(), json!(ev.step));
    o.insert("kind".into(), json!(ev.kind.name()));
    match &ev.kind {
        EventKind::Enter | EventKind::ExitStep | EventKind::Exited | EventKind::Stopped => {}
        EventKind::Assign { var, target, old, new } | EventKind::Transform { var, target, old, new } => {
            o.insert("var".into(), json!(var.as_str()));
            o.insert("target".into(), json!(target));
            o.insert("old".into(), opt_value(old));
            o.insert("new".into(), encode_value(new));
        }
        EventKind::Compare { lhs, rhs, op, result } => {
            o.insert("lhs".into(), encode_value(lhs));
            o.insert("rhs".into(), encode_value(rhs));
            o.insert("op".into(), json!(op.symbol()));
            o.insert("result".into(), json!(result));
        }
        EventKind::Swap { left, right, container, i, j } => {
            o.insert("left".into(), json!(left));
            o.insert("right".into(), json!(right));
            o.insert("container".into(), json!(container.as_ref().map(Ident::as_str)));
            o.insert("i".into(), json!(i));
            o.insert("j".into(), json!(j));
        }
        EventKind::Read { var, value } => {
            o.insert("var".into(), json!(var.as_str()));
            o.insert("value".into(), encode_value(value));
        }
        EventKind::Display { value, to } => {
            o.insert("value".into(), encode_value(value));
            o.insert("to".into(), json!(to.as_ref().map(Ident::as_str)));
        }
        EventKind::LoopIter { iteration } => {
            o.insert("iteration".into(), json!(iteration));
        }
    }
    if let Some(snap) = &ev.snapshot {
        let s: Map<String, Json> = snap
            .iter()
            .map(|(k, v)| (k.to_string(), encode_value(v)))
            .collect();
        o.insert("snapshot".into(), Json::Object(s));
    }
    Json::Object(o)
}

fn field<'a>(o: &'a Json, key: &str) -> Result<&'a Json, WireError> {
    o.get(key).ok_or_else(|| WireError(format!("missing {key}")))
}

fn str_field<'a>(o: &'a Json, key: &str) -> Result<&'a str, WireError> {
    field(o, key)?
        .as_str()
        .ok_or_else(|| WireError(format!("{key} must be a string")))
}

fn ident(s: &str) -> Result<Ident, WireError> {
    Ident::new(s).map_err(|e| WireError(e.to_string()))
}

fn opt_ident(o: &Json, key: &str) -> Result<Option<Ident>, WireError> {
    match o.get(key) {
        None | Some(Json::Null) => Ok(None),
        Some(Json::String(s)) => ident(s).map(Some),
        _ => Err(WireError(format!("{key} must be a string or null"))),
    }
}

fn opt_int(o: &Json, key: &str) -> Result<Option<i64>, WireError> {
    match o.get(key) {
        None | Some(Json::Null) => Ok(None),
        Some(v) => v
            .as_i64()
            .map(Some)
            .ok_or_else(|| WireError(format!("{key} must be an integer"))),
    }
}

pub fn decode_event(o: &Json) -> Result<TraceEvent, WireError> {
    let seq = field(o, "seq")?
        .as_u64()
        .ok_or_else(|| WireError("seq must be a positive integer".into()))?;
    let module = ident(str_field(o, "module")?)?;
    let step = str_field(o, "step")?.to_string();
    let change = || -> Result<(Ident, String, Option<Value>, Value), WireError> {
        let old = match field(o, "old")? {
            Json::Null => None,
            v => Some(decode_value(v)?),
        };
        Ok((
            ident(str_field(o, "var")?)?,
            str_field(o, "target")?.to_string(),
            old,
            decode_value(field(o, "new")?)?,
        ))
    };
    let kind = match str_field(o, "kind")? {
        "enter" => EventKind::Enter,
        "exit-step" => EventKind::ExitStep,
        "exited" => EventKind::Exited,
        "stopped" => EventKind::Stopped,
        "assign" => {
            let (var, target, old, new) = change()?;
            EventKind::Assign { var, target, old, new }
        }
        "transform" => {
            let (var, target, old, new) = change()?;
            EventKind::Transform { var, target, old, new }
        }
        "compare" => EventKind::Compare {
            lhs: decode_value(field(o, "lhs")?)?,
            rhs: decode_value(field(o, "rhs")?)?,
            op: BinaryOp::from_symbol(str_field(o, "op")?)
                .ok_or_else(|| WireError("unknown operator".into()))?,
            result: field(o, "result")?
                .as_bool()
                .ok_or_else(|| WireError("result must be a boolean".into()))?,
        },
        "swap" => EventKind::Swap {
            left: str_field(o, "left")?.to_string(),
            right: str_field(o, "right")?.to_string(),
            container: opt_ident(o, "container")?,
            i: opt_int(o, "i")?,
            j: opt_int(o, "j")?,
        },
        "read" => EventKind::Read {
            var: ident(str_field(o, "var")?)?,
            value: decode_value(field(o, "value")?)?,
        },
        "display" => EventKind::Display {
            value: decode_value(field(o, "value")?)?,
            to: opt_ident(o, "to")?,
        },
        "loop-iter" => EventKind::LoopIter {
            iteration: field(o, "iteration")?
                .as_u64()
                .ok_or_else(|| WireError("iteration must be an integer".into()))?,
        },
        other => return Err(WireError(format!("unknown event kind {other}"))),
    };
    let snapshot = match o.get("snapshot") {
        None | Some(Json::Null) => None,
        Some(Json::Object(m)) => Some(
            m.iter()
                .map(|(k, v)| Ok((ident(k)?, decode_value(v)?)))
                .collect::<Result<Snapshot, WireError>>()?,
        ),
        Some(_) => return Err(WireError("snapshot must be an object".into())),
    };
    Ok(TraceEvent {
        seq,
        module,
        step,
        kind,
        snapshot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> Ident {
        Ident::new(s).unwrap()
    }

    fn ev(seq: u64, kind: EventKind) -> TraceEvent {
        TraceEvent {
            seq,
            module: id("main"),
            step: "3".into(),
            kind,
            snapshot: None,
        }
    }

    #[test]
    fn every_kind_round_trips() {
        let list = Value::list(vec![Value::Int(3), Value::Int(1)]).unwrap();
        let mut with_snap = ev(1, EventKind::Enter);
        with_snap.snapshot = Some([(id("list"), list.clone())].into_iter().collect());
        let events = vec![
            with_snap,
            ev(2, EventKind::ExitStep),
            ev(3, EventKind::Assign { var: id("x"), target: "x".into(), old: None, new: Value::Real(48.0) }),
            ev(4, EventKind::Transform { var: id("l"), target: "l[2]".into(), old: Some(Value::Int(1)), new: Value::Int(2) }),
            ev(5, EventKind::Compare { lhs: Value::Int(3), rhs: Value::Real(0.1), op: BinaryOp::Ge, result: true }),
            ev(6, EventKind::Swap { left: "l[1]".into(), right: "l[2]".into(), container: Some(id("l")), i: Some(1), j: Some(2) }),
            ev(7, EventKind::Read { var: id("s"), value: Value::str("a\"b") }),
            ev(8, EventKind::Display { value: list, to: None }),
            ev(9, EventKind::LoopIter { iteration: 4 }),
            ev(10, EventKind::Exited),
            ev(11, EventKind::Stopped),
        ];
        for e in events {
            let wire = encode_event(&e).to_string();
            let back = decode_event(&serde_json::from_str(&wire).unwrap()).unwrap();
            assert_eq!(back, e, "{wire}");
        }
    }

    #[test]
    fn watch_reports_changes_only() {
        let snap = |v: i64| Some([(id("x"), Value::Int(v))].into_iter().collect());
        let mut t = vec![ev(1, EventKind::Enter), ev(2, EventKind::ExitStep), ev(3, EventKind::ExitStep)];
        t[0].snapshot = snap(1);
        t[1].snapshot = snap(1);
        t[2].snapshot = snap(2);
        assert_eq!(watch(&t, &id("x")), vec![(1, Value::Int(1)), (3, Value::Int(2))]);
        assert!(watch(&t, &id("y")).is_empty());
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode_event(&json!({"seq": 1})).is_err());
        assert!(decode_event(&json!({"seq": 1, "module": "m", "step": "1", "kind": "jump"})).is_err());
    }
}
