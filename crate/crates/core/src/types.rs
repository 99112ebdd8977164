//! Patch data types and the compatibility relation between them.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::ident::Ident;

/// The four basic and three complex Patch types.
///
/// `Unknown` is the element placeholder of an empty list or set literal. It
/// is resolved by the first context that pins the element type and is
/// compatible with everything until then.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PatchType {
    Integer,
    Real,
    Boolean,
    String,
    List(Box<PatchType>),
    Set(Box<PatchType>),
    Tuple(Vec<(Ident, PatchType)>),
    Unknown,
}

impl PatchType {
    pub fn list(elem: PatchType) -> Self {
        PatchType::List(Box::new(elem))
    }

    pub fn set(elem: PatchType) -> Self {
        PatchType::Set(Box::new(elem))
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, PatchType::Integer | PatchType::Real)
    }

    pub fn is_scalar(&self) -> bool {
        matches!(
            self,
            PatchType::Integer | PatchType::Real | PatchType::Boolean | PatchType::String
        )
    }

    /// Element type of a list or set.
    pub fn element(&self) -> Option<&PatchType> {
        match self {
            PatchType::List(e) | PatchType::Set(e) => Some(e),
            _ => None,
        }
    }

    pub fn has_unknown(&self) -> bool {
        match self {
            PatchType::Unknown => true,
            PatchType::List(e) | PatchType::Set(e) => e.has_unknown(),
            PatchType::Tuple(fields) => fields.iter().any(|(_, t)| t.has_unknown()),
            _ => false,
        }
    }

    pub fn field_position(&self, name: &Ident) -> Option<usize> {
        match self {
            PatchType::Tuple(fields) => fields.iter().position(|(n, _)| n == name),
            _ => None,
        }
    }
}

/// Structural equality where `Unknown` matches anything. No numeric
/// widening below the top level.
pub fn congruent(a: &PatchType, b: &PatchType) -> bool {
    use PatchType::*;
    match (a, b) {
        (Unknown, _) | (_, Unknown) => true,
        (List(x), List(y)) | (Set(x), Set(y)) => congruent(x, y),
        (Tuple(f), Tuple(g)) => {
            f.len() == g.len()
                && f.iter()
                    .zip(g)
                    .all(|((n1, t1), (n2, t2))| n1 == n2 && congruent(t1, t2))
        }
        _ => a == b,
    }
}

/// Type compatibility: integers and reals mix, everything else must agree
/// structurally.
pub fn compatible(a: &PatchType, b: &PatchType) -> bool {
    (a.is_numeric() && b.is_numeric()) || congruent(a, b)
}

/// Merges two congruent types, filling in `Unknown` placeholders from
/// whichever side knows more.
pub fn unify(a: &PatchType, b: &PatchType) -> Option<PatchType> {
    use PatchType::*;
    match (a, b) {
        (Unknown, t) | (t, Unknown) => Some(t.clone()),
        (List(x), List(y)) => unify(x, y).map(PatchType::list),
        (Set(x), Set(y)) => unify(x, y).map(PatchType::set),
        (Tuple(f), Tuple(g)) if f.len() == g.len() => f
            .iter()
            .zip(g)
            .map(|((n1, t1), (n2, t2))| {
                if n1 == n2 {
                    unify(t1, t2).map(|t| (n1.clone(), t))
                } else {
                    None
                }
            })
            .collect::<Option<Vec<_>>>()
            .map(Tuple),
        _ if a == b => Some(a.clone()),
        _ => None,
    }
}

impl fmt::Display for PatchType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatchType::Integer => f.write_str("integer"),
            PatchType::Real => f.write_str("real"),
            PatchType::Boolean => f.write_str("boolean"),
            PatchType::String => f.write_str("string"),
            PatchType::Unknown => f.write_str("unknown"),
            PatchType::List(e) => write!(f, "list({e})"),
            PatchType::Set(e) => write!(f, "set({e})"),
            PatchType::Tuple(fields) => {
                f.write_str("tuple(")?;
                for (i, (name, t)) in fields.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{name}: {t}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bad type {text:?} at offset {offset}: {reason}")]
pub struct TypeSyntaxError {
    pub text: String,
    pub offset: usize,
    pub reason: String,
}

impl FromStr for PatchType {
    type Err = TypeSyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = TypeParser { src: s, pos: 0 };
        let t = p.parse()?;
        p.skip_ws();
        if p.pos != s.len() {
            return Err(p.error("trailing text"));
        }
        Ok(t)
    }
}

struct TypeParser<'a> {
    src: &'a str,
    pos: usize,
}

impl TypeParser<'_> {
    fn error(&self, reason: &str) -> TypeSyntaxError {
        TypeSyntaxError {
            text: self.src.to_string(),
            offset: self.pos,
            reason: reason.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn word(&mut self) -> &str {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        self.pos += len;
        &rest[..len]
    }

    fn expect(&mut self, c: char) -> Result<(), TypeSyntaxError> {
        self.skip_ws();
        if self.src[self.pos..].starts_with(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.error(&format!("expected '{c}'")))
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn parse(&mut self) -> Result<PatchType, TypeSyntaxError> {
        let start = self.pos;
        let word = self.word().to_ascii_lowercase();
        let t = match word.as_str() {
            "integer" => PatchType::Integer,
            "real" => PatchType::Real,
            "boolean" => PatchType::Boolean,
            "string" => PatchType::String,
            "unknown" => PatchType::Unknown,
            "list" | "set" => {
                self.expect('(')?;
                let elem = self.parse()?;
                self.expect(')')?;
                if word == "list" {
                    PatchType::list(elem)
                } else {
                    PatchType::set(elem)
                }
            }
            "tuple" => {
                self.expect('(')?;
                let mut fields: Vec<(Ident, PatchType)> = Vec::new();
                loop {
                    let name_start = self.pos;
                    let raw = self.word().to_string();
                    let name = Ident::new(&raw).map_err(|e| {
                        self.pos = name_start;
                        self.error(&e.to_string())
                    })?;
                    if fields.iter().any(|(n, _)| *n == name) {
                        return Err(self.error("duplicate tuple field"));
                    }
                    self.expect(':')?;
                    fields.push((name, self.parse()?));
                    if !self.eat(',') {
                        break;
                    }
                }
                self.expect(')')?;
                PatchType::Tuple(fields)
            }
            _ => {
                self.pos = start;
                return Err(self.error("unknown type name"));
            }
        };
        Ok(t)
    }
}
