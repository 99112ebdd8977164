//! Canonical value syntax.
//!
//! Lists render in brackets, sets in braces (sorted), tuples in angle
//! brackets, booleans as `TRUE`/`FALSE`, strings double-quoted. Reals
//! always carry a decimal point or an exponent, so untyped text still tells
//! integers and reals apart.

use std::fmt::{self, Write};

use thiserror::Error;

use crate::ident::Ident;
use crate::types::PatchType;
use crate::value::{Value, ValueError};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("literal syntax error at offset {offset}: {message}")]
pub struct LiteralError {
    pub offset: usize,
    pub message: String,
}

impl LiteralError {
    pub fn kind(&self) -> &'static str {
        "literal-syntax-error"
    }
}

/// Renders `v` in canonical value syntax.
pub fn render_value(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, false).expect("writing to a String cannot fail");
    out
}

/// Like [`render_value`] but tuple members carry their names
/// (`<no: 2, zip: 10026>`), which is how tuple constants appear inside
/// expressions.
pub fn render_literal(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, true).expect("writing to a String cannot fail");
    out
}

pub fn render_real(x: f64) -> String {
    format!("{x:?}")
}

pub fn render_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 || c as u32 == 0x7f => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn write_value(out: &mut String, v: &Value, named: bool) -> fmt::Result {
    match v {
        Value::Int(i) => write!(out, "{i}"),
        Value::Real(x) => out.write_str(&render_real(*x)),
        Value::Bool(true) => out.write_str("TRUE"),
        Value::Bool(false) => out.write_str("FALSE"),
        Value::Str(s) => out.write_str(&render_string(s)),
        Value::List(items) => write_seq(out, "[", "]", items.iter(), named),
        Value::Set(items) => write_seq(out, "{", "}", items.iter(), named),
        Value::Tuple(fields) => {
            out.write_char('<')?;
            for (i, (name, v)) in fields.iter().enumerate() {
                if i > 0 {
                    out.write_str(", ")?;
                }
                if named {
                    write!(out, "{name}: ")?;
                }
                write_value(out, v, named)?;
            }
            out.write_char('>')
        }
    }
}

fn write_seq<'a>(
    out: &mut String,
    open: &str,
    close: &str,
    items: impl Iterator<Item = &'a Value>,
    named: bool,
) -> fmt::Result {
    out.write_str(open)?;
    for (i, v) in items.enumerate() {
        if i > 0 {
            out.write_str(", ")?;
        }
        write_value(out, v, named)?;
    }
    out.write_str(close)
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_value(self))
    }
}

/// Parses `text` as a value of type `ty`.
pub fn read_value(text: &str, ty: &PatchType) -> Result<Value, LiteralError> {
    let mut c = Cursor::new(text);
    let v = c.value(Some(ty))?;
    c.skip_ws();
    if !c.at_end() {
        return Err(c.error("trailing text after value"));
    }
    Ok(v)
}

/// Parses `text` without a type. Numbers with a decimal point or exponent
/// read as reals; unnamed tuple members get positional names `f1`, `f2`, ...
pub fn read_untyped(text: &str) -> Result<Value, LiteralError> {
    let mut c = Cursor::new(text);
    let v = c.value(None)?;
    c.skip_ws();
    if !c.at_end() {
        return Err(c.error("trailing text after value"));
    }
    Ok(v)
}

/// Byte cursor over source text, shared by the literal and expression
/// parsers.
pub(crate) struct Cursor<'a> {
    pub src: &'a str,
    pub pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(src: &'a str) -> Self {
        Cursor { src, pos: 0 }
    }

    pub fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    pub fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    pub fn skip_ws(&mut self) {
        let rest = self.rest();
        self.pos += rest.len() - rest.trim_start().len();
    }

    /// Consumes `s` (after whitespace) if it comes next.
    pub fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    pub fn error(&self, message: impl Into<String>) -> LiteralError {
        LiteralError {
            offset: self.pos,
            message: message.into(),
        }
    }

    /// Reads an identifier-shaped word without consuming anything else.
    pub fn word(&mut self) -> &'a str {
        self.skip_ws();
        let rest = self.rest();
        let mut chars = rest.char_indices();
        let len = match chars.next() {
            Some((_, c)) if c.is_ascii_alphabetic() || c == '_' => chars
                .find(|(_, c)| !(c.is_ascii_alphanumeric() || *c == '_'))
                .map(|(i, _)| i)
                .unwrap_or(rest.len()),
            _ => 0,
        };
        self.pos += len;
        &rest[..len]
    }

    pub fn peek_word(&mut self) -> &'a str {
        let save = self.pos;
        let w = self.word();
        self.pos = save;
        w
    }

    fn lift(&self, at: usize, e: ValueError) -> LiteralError {
        LiteralError {
            offset: at,
            message: e.to_string(),
        }
    }

    /// Parses one value. `ty` guides number kinds and tuple member names.
    pub fn value(&mut self, ty: Option<&PatchType>) -> Result<Value, LiteralError> {
        let ty = match ty {
            Some(PatchType::Unknown) | None => None,
            t => t,
        };
        self.skip_ws();
        let start = self.pos;
        let Some(c) = self.peek() else {
            return Err(self.error("expected a value"));
        };
        match c {
            '"' => {
                let s = self.string()?;
                self.expect_type(start, ty, &[PatchType::String])?;
                Ok(Value::Str(s))
            }
            '[' | '{' => {
                let is_list = c == '[';
                let elem = match ty {
                    None => None,
                    Some(PatchType::List(e)) if is_list => Some(e.as_ref()),
                    Some(PatchType::Set(e)) if !is_list => Some(e.as_ref()),
                    Some(t) => return Err(self.error(format!("expected a {t} value"))),
                };
                self.pos += 1;
                let close = if is_list { "]" } else { "}" };
                let mut items = Vec::new();
                if !self.eat(close) {
                    loop {
                        items.push(self.value(elem)?);
                        if self.eat(close) {
                            break;
                        }
                        if !self.eat(",") {
                            return Err(self.error(format!("expected ',' or '{close}'")));
                        }
                    }
                }
                let v = if is_list { Value::list(items) } else { Value::set(items) };
                v.map_err(|e| self.lift(start, e))
            }
            '<' | '⟨' => {
                self.pos += c.len_utf8();
                let fields_ty = match ty {
                    None => None,
                    Some(PatchType::Tuple(f)) => Some(f),
                    Some(t) => return Err(self.error(format!("expected a {t} value"))),
                };
                let mut fields: Vec<(Ident, Value)> = Vec::new();
                let closes = |cur: &mut Self| cur.eat(">") || cur.eat("⟩");
                if !closes(self) {
                    loop {
                        let k = fields.len();
                        let name = self.member_name()?;
                        let (name, elem_ty) = match fields_ty {
                            Some(ft) => {
                                let Some((n, t)) = ft.get(k) else {
                                    return Err(self.error("too many tuple members"));
                                };
                                if name.as_ref().is_some_and(|given| given != n) {
                                    return Err(self.error(format!("expected member {n}")));
                                }
                                (n.clone(), Some(t))
                            }
                            None => (
                                name.unwrap_or_else(|| {
                                    Ident::new(&format!("f{}", k + 1)).expect("valid identifier")
                                }),
                                None,
                            ),
                        };
                        let v = self.value(elem_ty)?;
                        fields.push((name, v));
                        if closes(self) {
                            break;
                        }
                        if !self.eat(",") {
                            return Err(self.error("expected ',' or '>'"));
                        }
                    }
                }
                if let Some(ft) = fields_ty {
                    if ft.len() != fields.len() {
                        return Err(self.error(format!(
                            "expected {} tuple members, found {}",
                            ft.len(),
                            fields.len()
                        )));
                    }
                }
                Value::tuple(fields).map_err(|e| self.lift(start, e))
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' => self.number(ty),
            _ => {
                let w = self.word();
                match w.to_ascii_uppercase().as_str() {
                    "TRUE" | "FALSE" => {
                        self.expect_type(start, ty, &[PatchType::Boolean])?;
                        Ok(Value::Bool(w.eq_ignore_ascii_case("TRUE")))
                    }
                    _ => {
                        self.pos = start;
                        Err(self.error("expected a value"))
                    }
                }
            }
        }
    }

    fn expect_type(&mut self, start: usize, ty: Option<&PatchType>, ok: &[PatchType]) -> Result<(), LiteralError> {
        match ty {
            Some(t) if !ok.contains(t) => {
                self.pos = start;
                Err(self.error(format!("expected a {t} value")))
            }
            _ => Ok(()),
        }
    }

    /// Optional `name:` prefix of a tuple member.
    fn member_name(&mut self) -> Result<Option<Ident>, LiteralError> {
        let save = self.pos;
        let w = self.word();
        if !w.is_empty() && self.eat(":") {
            return Ident::new(w).map(Some).map_err(|e| LiteralError {
                offset: save,
                message: e.to_string(),
            });
        }
        self.pos = save;
        Ok(None)
    }

    pub fn string(&mut self) -> Result<String, LiteralError> {
        debug_assert_eq!(self.peek(), Some('"'));
        self.pos += 1;
        let mut out = String::new();
        loop {
            let Some(c) = self.peek() else {
                return Err(self.error("unterminated string"));
            };
            self.pos += c.len_utf8();
            match c {
                '"' => return Ok(out),
                '\\' => {
                    let Some(e) = self.peek() else {
                        return Err(self.error("unterminated escape"));
                    };
                    self.pos += e.len_utf8();
                    match e {
                        '"' => out.push('"'),
                        '\\' => out.push('\\'),
                        'n' => out.push('\n'),
                        't' => out.push('\t'),
                        'r' => out.push('\r'),
                        'u' => {
                            let hex = self.rest().get(..4).unwrap_or("");
                            let code = u32::from_str_radix(hex, 16)
                                .ok()
                                .filter(|_| hex.len() == 4 && hex.chars().all(|c| c.is_ascii_hexdigit()))
                                .and_then(char::from_u32)
                                .ok_or_else(|| self.error("bad \\u escape"))?;
                            self.pos += 4;
                            out.push(code);
                        }
                        _ => return Err(self.error(format!("unknown escape \\{e}"))),
                    }
                }
                c => out.push(c),
            }
        }
    }

    /// Scans a numeric token. Returns the text and whether it is real-shaped.
    pub fn number_token(&mut self) -> Result<(&'a str, bool), LiteralError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        if i < bytes.len() && (bytes[i] == b'-' || bytes[i] == b'+') {
            i += 1;
        }
        let digits_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i == digits_start {
            return Err(self.error("expected digits"));
        }
        let mut real = false;
        if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
            real = true;
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'-' || bytes[j] == b'+') {
                j += 1;
            }
            if j < bytes.len() && bytes[j].is_ascii_digit() {
                real = true;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        self.pos = i;
        Ok((&self.src[start..i], real))
    }

    fn number(&mut self, ty: Option<&PatchType>) -> Result<Value, LiteralError> {
        self.skip_ws();
        let start = self.pos;
        let (tok, real) = self.number_token()?;
        let as_real = match ty {
            None => real,
            Some(PatchType::Real) => true,
            Some(PatchType::Integer) if !real => false,
            Some(t) => {
                self.pos = start;
                return Err(self.error(format!("expected a {t} value")));
            }
        };
        parse_number(tok, as_real).map_err(|m| LiteralError { offset: start, message: m })
    }
}

pub(crate) fn parse_number(tok: &str, as_real: bool) -> Result<Value, String> {
    if as_real {
        let x: f64 = tok.parse().map_err(|_| format!("bad real {tok:?}"))?;
        if !x.is_finite() {
            return Err(format!("real {tok} is out of range"));
        }
        Ok(Value::Real(x))
    } else {
        tok.parse::<i64>()
            .map(Value::Int)
            .map_err(|_| format!("integer {tok} is out of range"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ty(s: &str) -> PatchType {
        s.parse().unwrap()
    }

    #[test]
    fn literal_examples() {
        let l = read_value("[20, 9, 34]", &ty("list(integer)")).unwrap();
        assert_eq!(render_value(&l), "[20, 9, 34]");
        let s = read_value(r#"{"Patch","Java","C"}"#, &ty("set(string)")).unwrap();
        assert_eq!(render_value(&s), r#"{"C", "Java", "Patch"}"#);
        assert_eq!(read_value("TRUE", &PatchType::Boolean).unwrap(), Value::Bool(true));
        assert_eq!(render_value(&Value::Bool(true)), "TRUE");
    }

    #[test]
    fn set_order_matches_lexicographic_oracle() {
        let mut words = ["Patch", "Java", "C"];
        words.sort_unstable_by(|a, b| a.as_bytes().cmp(b.as_bytes()));
        let expected = format!(
            "{{{}}}",
            words.iter().map(|w| format!("\"{w}\"")).collect::<Vec<_>>().join(", ")
        );
        let s = read_value(r#"{"Patch", "Java", "C"}"#, &ty("set(string)")).unwrap();
        assert_eq!(render_value(&s), expected);
    }

    #[test]
    fn tuples_positional_and_named() {
        let t = ty("tuple(no: integer, street: string, city: string, zip: integer)");
        let v = read_value(r#"<2, "Main Road", "New York", 10026>"#, &t).unwrap();
        assert_eq!(render_value(&v), r#"<2, "Main Road", "New York", 10026>"#);
        assert_eq!(
            render_literal(&v),
            r#"<no: 2, street: "Main Road", city: "New York", zip: 10026>"#
        );
        assert_eq!(read_value(&render_literal(&v), &t).unwrap(), v);
        assert!(read_value("<2>", &t).is_err());
        let u = read_untyped(r#"⟨2, "x"⟩"#).unwrap();
        assert_eq!(crate::value::type_of(&u).to_string(), "tuple(f1: integer, f2: string)");
    }

    #[test]
    fn reals_keep_their_kind() {
        assert_eq!(render_value(&Value::Real(48.0)), "48.0");
        assert_eq!(read_untyped("48.0").unwrap(), Value::Real(48.0));
        assert_eq!(read_untyped("48").unwrap(), Value::Int(48));
        assert_eq!(read_untyped("1e300").unwrap(), Value::Real(1e300));
        assert_eq!(read_value("48", &PatchType::Real).unwrap(), Value::Real(48.0));
        assert_eq!(read_value("1e+16", &PatchType::Real).unwrap(), Value::Real(1e16));
        assert!(read_value("4.5", &PatchType::Integer).is_err());
        assert!(read_untyped("1e999").is_err());
        assert!(read_untyped("99999999999999999999").is_err());
    }

    #[test]
    fn string_escapes() {
        let s = Value::str("a\"b\\c\nd\u{1}é");
        let text = render_value(&s);
        assert_eq!(text, r#""a\"b\\c\nd\u0001é""#);
        assert_eq!(read_untyped(&text).unwrap(), s);
        assert!(read_untyped(r#""abc"#).is_err());
    }

    #[test]
    fn errors() {
        assert!(read_untyped("").is_err());
        assert!(read_untyped("[1, 2").is_err());
        assert!(read_untyped("[1, \"a\"]").is_err());
        assert!(read_value("[1, 2]", &ty("set(integer)")).is_err());
        assert!(read_untyped("[1] x").is_err());
    }
}
