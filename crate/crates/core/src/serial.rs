//! The JSON document format for Patch programs.
//!
//! Documents are objects with `formatVersion`, `entry`, `modules` and an
//! optional `layout`. Any other top-level member, and the layout itself,
//! is kept as raw text and written back untouched. Serialization is
//! canonical: sorted keys, two-space indentation, steps in document order
//! and a trailing newline.

use std::collections::BTreeMap;

use serde_json::value::RawValue;
use serde_json::{json, Map, Value as Json};
use thiserror::Error;

use crate::expr::{parse_expr, parse_place, Expr, Place};
use crate::ident::Ident;
use crate::literal::{read_untyped, render_literal};
use crate::model::{
    Actual, AssignForm, Binding, ChildEdge, DataObjectDecl, Group, ModuleDef, Payload, PatchProgram, ResultBinding,
    Source, Step, StepKind,
};
use crate::types::PatchType;

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SerialError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsupported format version {0}")]
    VersionUnsupported(String),
}

impl SerialError {
    pub fn kind(&self) -> &'static str {
        match self {
            SerialError::Parse { .. } => "parse-error",
            SerialError::VersionUnsupported(_) => "version-unsupported",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchDocument {
    pub program: PatchProgram,
    /// Raw JSON text of the editor geometry, if any.
    pub layout: Option<String>,
    /// Unrecognized top-level members, as raw JSON text.
    pub extra: BTreeMap<String, String>,
}

impl PatchDocument {
    pub fn new(program: PatchProgram) -> Self {
        PatchDocument {
            program,
            layout: None,
            extra: BTreeMap::new(),
        }
    }

    /// The same document with every module's steps in document order.
    pub fn canonicalized(&self) -> PatchDocument {
        let mut d = self.clone();
        for m in &mut d.program.modules {
            *m = canonical_module(m);
        }
        d
    }
}

/// Reachable steps in canonical order, then unreachable ones as they were.
fn canonical_module(m: &ModuleDef) -> ModuleDef {
    let order: Vec<&Step> = m.canonical_order();
    let mut steps: Vec<Step> = order.iter().map(|s| (*s).clone()).collect();
    let mut taken = vec![false; m.steps.len()];
    for s in &order {
        if let Some(i) = m.steps.iter().position(|x| std::ptr::eq(x, *s)) {
            taken[i] = true;
        }
    }
    steps.extend(m.steps.iter().zip(&taken).filter(|(_, t)| !**t).map(|(s, _)| s.clone()));
    ModuleDef { steps, ..m.clone() }
}

// Serializing

pub fn serialize(doc: &PatchDocument) -> String {
    let mut members: BTreeMap<&str, String> = BTreeMap::new();
    members.insert("entry", json_text(&json!(doc.program.entry.as_str())));
    members.insert("formatVersion", FORMAT_VERSION.to_string());
    let modules: Vec<Json> = doc.program.modules.iter().map(|m| module_json(&canonical_module(m))).collect();
    members.insert("modules", json_text(&Json::Array(modules)));
    if let Some(layout) = &doc.layout {
        members.insert("layout", layout.clone());
    }
    for (k, v) in &doc.extra {
        members.entry(k.as_str()).or_insert_with(|| v.clone());
    }
    let mut out = String::from("{\n");
    let n = members.len();
    for (i, (k, v)) in members.into_iter().enumerate() {
        out.push_str("  ");
        out.push_str(&json_text(&json!(k)));
        out.push_str(": ");
        out.push_str(&indent(&v));
        if i + 1 < n {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("}\n");
    out
}

fn json_text(j: &Json) -> String {
    serde_json::to_string_pretty(j).expect("json values always serialize")
}

fn indent(text: &str) -> String {
    text.replace('\n', "\n  ")
}

fn module_json(m: &ModuleDef) -> Json {
    let mut o = Map::new();
    for (k, v) in &m.extra {
        o.insert(k.clone(), v.clone());
    }
    o.insert("name".into(), json!(m.name.as_str()));
    o.insert("inputs".into(), Json::Array(m.inputs.iter().map(decl_json).collect()));
    o.insert("outputs".into(), Json::Array(m.outputs.iter().map(decl_json).collect()));
    o.insert("steps".into(), Json::Array(m.steps.iter().map(step_json).collect()));
    Json::Object(o)
}

fn decl_json(d: &DataObjectDecl) -> Json {
    json!({
        "name": d.name.as_str(),
        "type": d.ty.to_string(),
        "binding": d.binding.as_str(),
    })
}

fn step_json(s: &Step) -> Json {
    let mut o = Map::new();
    for (k, v) in &s.extra {
        o.insert(k.clone(), v.clone());
    }
    o.insert("id".into(), json!(s.id));
    o.insert("kind".into(), json!(s.kind().as_str()));
    o.insert("payload".into(), payload_json(&s.payload));
    o.insert("next".into(), json!(s.next));
    let children = s
        .children
        .iter()
        .map(|c| {
            let mut e = json!({ "group": c.group.tag(), "step": c.step });
            if let Group::Case(v) = &c.group {
                e["label"] = json!(render_literal(v));
            }
            e
        })
        .collect();
    o.insert("children".into(), Json::Array(children));
    Json::Object(o)
}

fn ex(e: &Expr) -> Json {
    json!(e.to_string())
}

fn pl(p: &Place) -> Json {
    json!(p.to_string())
}

fn payload_json(p: &Payload) -> Json {
    match p {
        Payload::Module | Payload::Exit | Payload::Stop => json!({}),
        Payload::Assign(AssignForm::Copy { target, source }) => {
            json!({ "form": "copy", "target": pl(target), "source": ex(source) })
        }
        Payload::Assign(AssignForm::Exchange { left, right }) => {
            json!({ "form": "exchange", "left": pl(left), "right": pl(right) })
        }
        Payload::Transform { target, expr } => json!({ "target": pl(target), "expr": ex(expr) }),
        Payload::Read { target, ty, from } => {
            let mut o = json!({ "target": target.as_str(), "from": from.as_str() });
            if let Some(t) = ty {
                o["type"] = json!(t.to_string());
            }
            o
        }
        Payload::Display { expr, to } => {
            let mut o = json!({ "expr": ex(expr) });
            if let Some(t) = to {
                o["to"] = json!(t.as_str());
            }
            o
        }
        Payload::ByPass { cond } | Payload::EitherOr { cond } | Payload::ConditionalLoop { cond } => {
            json!({ "cond": ex(cond) })
        }
        Payload::Labeled { scrutinee } => json!({ "scrutinee": ex(scrutinee) }),
        Payload::CounterLoop { var, start, end } => {
            json!({ "var": var.as_str(), "start": ex(start), "end": ex(end) })
        }
        Payload::SentinelLoop { var, collection, marker } => {
            json!({ "var": var.as_str(), "collection": ex(collection), "marker": ex(marker) })
        }
        Payload::Call { module, args, results } => json!({
            "module": module.as_str(),
            "args": args.iter().map(|a| {
                let mut o = json!({ "expr": ex(&a.expr) });
                if let Some(n) = &a.name {
                    o["name"] = json!(n.as_str());
                }
                o
            }).collect::<Vec<_>>(),
            "results": results.iter().map(|r| json!({
                "output": r.output.as_str(),
                "target": pl(&r.target),
            })).collect::<Vec<_>>(),
        }),
    }
}

// Parsing

/// Maps byte offsets of borrowed raw values back to line and column.
struct Text<'a> {
    text: &'a str,
}

impl<'a> Text<'a> {
    fn offset_of(&self, raw: &RawValue) -> usize {
        let base = self.text.as_ptr() as usize;
        let p = raw.get().as_ptr() as usize;
        if p >= base && p <= base + self.text.len() {
            p - base
        } else {
            0
        }
    }

    fn error_at(&self, offset: usize, message: impl Into<String>) -> SerialError {
        let before = &self.text[..offset.min(self.text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        SerialError::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    fn error(&self, raw: &RawValue, message: impl Into<String>) -> SerialError {
        self.error_at(self.offset_of(raw), message)
    }
}

fn syntax(e: serde_json::Error) -> SerialError {
    SerialError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

type Members<'a> = BTreeMap<String, &'a RawValue>;

pub fn parse(text: &str) -> Result<PatchDocument, SerialError> {
    let src = Text { text };
    let top: Members = serde_json::from_str(text).map_err(syntax)?;
    let whole = |msg: &str| src.error_at(text.len() - text.trim_start().len(), msg);

    let version = top.get("formatVersion").ok_or_else(|| whole("missing formatVersion"))?;
    match serde_json::from_str::<Json>(version.get()).map_err(syntax)? {
        Json::Number(n) if n.as_u64() == Some(FORMAT_VERSION) => {}
        Json::Number(n) => return Err(SerialError::VersionUnsupported(n.to_string())),
        _ => return Err(src.error(version, "formatVersion must be a number")),
    }
    let entry_raw = top.get("entry").ok_or_else(|| whole("missing entry"))?;
    let entry = ident(&src, entry_raw, &string_of(&src, entry_raw)?)?;
    let modules_raw = top.get("modules").ok_or_else(|| whole("missing modules"))?;
    let list: Vec<&RawValue> =
        serde_json::from_str(modules_raw.get()).map_err(|_| src.error(modules_raw, "modules must be an array"))?;
    let modules = list.into_iter().map(|m| parse_module(&src, m)).collect::<Result<_, _>>()?;

    let mut extra = BTreeMap::new();
    let mut layout = None;
    for (k, v) in &top {
        match k.as_str() {
            "formatVersion" | "entry" | "modules" => {}
            "layout" => layout = Some(v.get().to_string()),
            _ => {
                extra.insert(k.clone(), v.get().to_string());
            }
        }
    }
    Ok(PatchDocument {
        program: PatchProgram { modules, entry },
        layout,
        extra,
    })
}

fn members<'a>(src: &Text, raw: &'a RawValue, what: &str) -> Result<Members<'a>, SerialError> {
    serde_json::from_str(raw.get()).map_err(|_| src.error(raw, format!("{what} must be an object")))
}

fn field<'a>(src: &Text, obj: &Members<'a>, at: &RawValue, key: &str) -> Result<&'a RawValue, SerialError> {
    obj.get(key).copied().ok_or_else(|| src.error(at, format!("missing field {key:?}")))
}

fn string_of(src: &Text, raw: &RawValue) -> Result<String, SerialError> {
    serde_json::from_str(raw.get()).map_err(|_| src.error(raw, "expected a string"))
}

fn opt_string(src: &Text, obj: &Members, key: &str) -> Result<Option<String>, SerialError> {
    match obj.get(key) {
        None => Ok(None),
        Some(raw) if raw.get() == "null" => Ok(None),
        Some(raw) => string_of(src, raw).map(Some),
    }
}

fn str_field(src: &Text, obj: &Members, at: &RawValue, key: &str) -> Result<String, SerialError> {
    string_of(src, field(src, obj, at, key)?)
}

fn ident(src: &Text, at: &RawValue, s: &str) -> Result<Ident, SerialError> {
    Ident::new(s).map_err(|e| src.error(at, e.to_string()))
}

fn ident_field(src: &Text, obj: &Members, at: &RawValue, key: &str) -> Result<Ident, SerialError> {
    let raw = field(src, obj, at, key)?;
    ident(src, raw, &string_of(src, raw)?)
}

fn expr_field(src: &Text, obj: &Members, at: &RawValue, key: &str) -> Result<Expr, SerialError> {
    let raw = field(src, obj, at, key)?;
    parse_expr(&string_of(src, raw)?).map_err(|e| src.error(raw, format!("{key}: {e}")))
}

fn place_field(src: &Text, obj: &Members, at: &RawValue, key: &str) -> Result<Place, SerialError> {
    let raw = field(src, obj, at, key)?;
    parse_place(&string_of(src, raw)?).map_err(|e| src.error(raw, format!("{key}: {e}")))
}

fn type_of_text(src: &Text, at: &RawValue, s: &str) -> Result<PatchType, SerialError> {
    s.parse().map_err(|e: crate::types::TypeSyntaxError| src.error(at, e.to_string()))
}

fn array<'a>(src: &Text, raw: &'a RawValue, what: &str) -> Result<Vec<&'a RawValue>, SerialError> {
    serde_json::from_str(raw.get()).map_err(|_| src.error(raw, format!("{what} must be an array")))
}

fn no_unknown(src: &Text, obj: &Members, at: &RawValue, allowed: &[&str]) -> Result<(), SerialError> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(src.error(at, format!("unexpected field {k:?}"))),
        None => Ok(()),
    }
}

fn extras(src: &Text, obj: &Members, known: &[&str]) -> Result<BTreeMap<String, Json>, SerialError> {
    obj.iter()
        .filter(|(k, _)| !known.contains(&k.as_str()))
        .map(|(k, v)| Ok((k.clone(), serde_json::from_str(v.get()).map_err(|_| src.error(v, "bad value"))?)))
        .collect()
}

fn parse_module(src: &Text, raw: &RawValue) -> Result<ModuleDef, SerialError> {
    const KNOWN: &[&str] = &["name", "inputs", "outputs", "steps"];
    let o = members(src, raw, "module")?;
    let decls = |key: &str| -> Result<Vec<DataObjectDecl>, SerialError> {
        array(src, field(src, &o, raw, key)?, key)?
            .into_iter()
            .map(|d| parse_decl(src, d))
            .collect()
    };
    let steps = array(src, field(src, &o, raw, "steps")?, "steps")?
        .into_iter()
        .map(|s| parse_step(src, s))
        .collect::<Result<_, _>>()?;
    Ok(ModuleDef {
        name: ident_field(src, &o, raw, "name")?,
        inputs: decls("inputs")?,
        outputs: decls("outputs")?,
        steps,
        extra: extras(src, &o, KNOWN)?,
    })
}

fn parse_decl(src: &Text, raw: &RawValue) -> Result<DataObjectDecl, SerialError> {
    let o = members(src, raw, "data object")?;
    no_unknown(src, &o, raw, &["name", "type", "binding"])?;
    let b = str_field(src, &o, raw, "binding")?;
    Ok(DataObjectDecl {
        name: ident_field(src, &o, raw, "name")?,
        ty: type_of_text(src, raw, &str_field(src, &o, raw, "type")?)?,
        binding: Binding::parse(&b).ok_or_else(|| src.error(raw, format!("unknown binding {b:?}")))?,
    })
}

fn parse_step(src: &Text, raw: &RawValue) -> Result<Step, SerialError> {
    const KNOWN: &[&str] = &["id", "kind", "payload", "next", "children"];
    let o = members(src, raw, "step")?;
    let kind_text = str_field(src, &o, raw, "kind")?;
    let kind = StepKind::parse(&kind_text).ok_or_else(|| src.error(raw, format!("unknown step kind {kind_text:?}")))?;
    let payload_raw = field(src, &o, raw, "payload")?;
    let payload = parse_payload(src, kind, payload_raw)?;
    let children = match o.get("children") {
        None => Vec::new(),
        Some(c) => array(src, c, "children")?
            .into_iter()
            .map(|e| parse_child(src, e))
            .collect::<Result<_, _>>()?,
    };
    Ok(Step {
        id: str_field(src, &o, raw, "id")?,
        payload,
        next: opt_string(src, &o, "next")?,
        children,
        extra: extras(src, &o, KNOWN)?,
    })
}

fn parse_child(src: &Text, raw: &RawValue) -> Result<ChildEdge, SerialError> {
    let o = members(src, raw, "child edge")?;
    no_unknown(src, &o, raw, &["group", "label", "step"])?;
    let tag = str_field(src, &o, raw, "group")?;
    let group = match tag.as_str() {
        "body" => Group::Body,
        "then" => Group::Then,
        "else" => Group::Else,
        "default" => Group::Default,
        "case" => {
            let l = field(src, &o, raw, "label")?;
            let text = string_of(src, l)?;
            Group::Case(read_untyped(&text).map_err(|e| src.error(l, e.to_string()))?)
        }
        _ => return Err(src.error(raw, format!("unknown group {tag:?}"))),
    };
    if tag != "case" && o.contains_key("label") {
        return Err(src.error(raw, "only case edges carry a label"));
    }
    Ok(ChildEdge {
        group,
        step: str_field(src, &o, raw, "step")?,
    })
}

fn parse_payload(src: &Text, kind: StepKind, raw: &RawValue) -> Result<Payload, SerialError> {
    let o = members(src, raw, "payload")?;
    let only = |keys: &[&str]| no_unknown(src, &o, raw, keys);
    let e = |k: &str| expr_field(src, &o, raw, k);
    let p = |k: &str| place_field(src, &o, raw, k);
    let i = |k: &str| ident_field(src, &o, raw, k);
    Ok(match kind {
        StepKind::Module => {
            only(&[])?;
            Payload::Module
        }
        StepKind::Exit => {
            only(&[])?;
            Payload::Exit
        }
        StepKind::Stop => {
            only(&[])?;
            Payload::Stop
        }
        StepKind::Assign => match str_field(src, &o, raw, "form")?.as_str() {
            "copy" => {
                only(&["form", "target", "source"])?;
                Payload::Assign(AssignForm::Copy {
                    target: p("target")?,
                    source: e("source")?,
                })
            }
            "exchange" => {
                only(&["form", "left", "right"])?;
                Payload::Assign(AssignForm::Exchange {
                    left: p("left")?,
                    right: p("right")?,
                })
            }
            other => return Err(src.error(raw, format!("unknown assignment form {other:?}"))),
        },
        StepKind::Transform => {
            only(&["target", "expr"])?;
            Payload::Transform {
                target: p("target")?,
                expr: e("expr")?,
            }
        }
        StepKind::Read => {
            only(&["target", "type", "from"])?;
            let from = match str_field(src, &o, raw, "from")?.as_str() {
                "console" => Source::Console,
                "repository" => Source::Repository,
                other => return Err(src.error(raw, format!("unknown source {other:?}"))),
            };
            let ty = match opt_string(src, &o, "type")? {
                Some(t) => Some(type_of_text(src, raw, &t)?),
                None => None,
            };
            Payload::Read {
                target: i("target")?,
                ty,
                from,
            }
        }
        StepKind::Display => {
            only(&["expr", "to"])?;
            let to = match opt_string(src, &o, "to")? {
                Some(t) => Some(ident(src, raw, &t)?),
                None => None,
            };
            Payload::Display { expr: e("expr")?, to }
        }
        StepKind::ByPass => {
            only(&["cond"])?;
            Payload::ByPass { cond: e("cond")? }
        }
        StepKind::EitherOr => {
            only(&["cond"])?;
            Payload::EitherOr { cond: e("cond")? }
        }
        StepKind::ConditionalLoop => {
            only(&["cond"])?;
            Payload::ConditionalLoop { cond: e("cond")? }
        }
        StepKind::Labeled => {
            only(&["scrutinee"])?;
            Payload::Labeled { scrutinee: e("scrutinee")? }
        }
        StepKind::CounterLoop => {
            only(&["var", "start", "end"])?;
            Payload::CounterLoop {
                var: i("var")?,
                start: e("start")?,
                end: e("end")?,
            }
        }
        StepKind::SentinelLoop => {
            only(&["var", "collection", "marker"])?;
            Payload::SentinelLoop {
                var: i("var")?,
                collection: e("collection")?,
                marker: e("marker")?,
            }
        }
        StepKind::Call => {
            only(&["module", "args", "results"])?;
            let args = array(src, field(src, &o, raw, "args")?, "args")?
                .into_iter()
                .map(|a| {
                    let ao = members(src, a, "argument")?;
                    no_unknown(src, &ao, a, &["name", "expr"])?;
                    let name = match opt_string(src, &ao, "name")? {
                        Some(n) => Some(ident(src, a, &n)?),
                        None => None,
                    };
                    Ok(Actual {
                        name,
                        expr: expr_field(src, &ao, a, "expr")?,
                    })
                })
                .collect::<Result<_, SerialError>>()?;
            let results = array(src, field(src, &o, raw, "results")?, "results")?
                .into_iter()
                .map(|r| {
                    let ro = members(src, r, "result")?;
                    no_unknown(src, &ro, r, &["output", "target"])?;
                    Ok(ResultBinding {
                        output: ident_field(src, &ro, r, "output")?,
                        target: place_field(src, &ro, r, "target")?,
                    })
                })
                .collect::<Result<_, SerialError>>()?;
            Payload::Call {
                module: i("module")?,
                args,
                results,
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::bubble_sort_program;

    #[test]
    fn bubble_sort_round_trips() {
        let doc = PatchDocument::new(bubble_sort_program());
        let text = serialize(&doc);
        assert!(text.ends_with("}\n"));
        let back = parse(&text).unwrap();
        assert_eq!(back, doc.canonicalized());
        assert_eq!(back.program.modules[0].steps.len(), 9);
        assert_eq!(serialize(&back), text);
        let ids: Vec<&str> = back.program.modules[0].steps.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["m", "1", "2", "8", "3", "4", "5", "6", "7"]);
    }

    #[test]
    fn unknown_members_survive_verbatim() {
        let doc = PatchDocument::new(bubble_sort_program());
        let text = serialize(&doc);
        let with = text.replacen(
            "{\n",
            "{\n  \"color-theme\": {\"dark\":  true, \"n\": 1.50},\n  \"layout\": {\"m\": [0, 0]},\n",
            1,
        );
        let d = parse(&with).unwrap();
        assert_eq!(d.extra["color-theme"], "{\"dark\":  true, \"n\": 1.50}");
        assert_eq!(d.layout.as_deref(), Some("{\"m\": [0, 0]}"));
        let again = serialize(&d);
        assert!(again.contains("\"color-theme\": {\"dark\":  true, \"n\": 1.50}"));
        assert_eq!(parse(&again).unwrap(), d);
        assert_eq!(serialize(&parse(&again).unwrap()), again);
    }

    #[test]
    fn errors_have_positions() {
        match parse("") {
            Err(SerialError::Parse { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse("{\n  \"formatVersion\": 1,\n  \"entry\": \"m\",\n  \"modules\": [\n    {\"name\": 3}\n  ]\n}") {
            Err(SerialError::Parse { line, column, .. }) => assert_eq!((line, column), (5, 5)),
            other => panic!("{other:?}"),
        }
        match parse("{\"formatVersion\": 2, \"entry\": \"m\", \"modules\": []}") {
            Err(e) => assert_eq!(e.kind(), "version-unsupported"),
            other => panic!("{other:?}"),
        }
        let text = serialize(&PatchDocument::new(bubble_sort_program()));
        let bad = text.replace("LEN list < 2", "LEN list <");
        let err = parse(&bad).unwrap_err();
        assert_eq!(err.kind(), "parse-error");
        let bad = text.replace("\"cond\": \"NOT sorted\"", "\"cond\": \"NOT sorted\", \"speed\": 3");
        assert!(parse(&bad).is_err());
    }
}
