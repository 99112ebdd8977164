//! Runtime values.

use std::cmp::Ordering;

use thiserror::Error;

use crate::ident::Ident;
use crate::types::{compatible, congruent, unify, PatchType};

/// A Patch runtime value.
///
/// Sets are kept sorted in [`canonical_cmp`] order with duplicates removed,
/// so two equal sets are also structurally identical. Build collections
/// through [`Value::list`], [`Value::set`] and [`Value::tuple`] to keep the
/// homogeneity and uniqueness invariants.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
    Bool(bool),
    Str(String),
    List(Vec<Value>),
    Set(Vec<Value>),
    Tuple(Vec<(Ident, Value)>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValueError {
    #[error("cannot assign a {from} value to a {to} object")]
    IncompatibleAssignment { from: PatchType, to: PatchType },
    #[error("index {index} is outside 1..={len}")]
    IndexOutOfRange { index: i64, len: usize },
    #[error("{0}")]
    NotIndexable(String),
    #[error("no field named {0}")]
    NoSuchField(Ident),
    #[error("{0}")]
    TypeMismatch(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("arithmetic overflow")]
    ArithOverflow,
    #[error("collection elements must share one type: {0} vs {1}")]
    NotHomogeneous(PatchType, PatchType),
    #[error("duplicate tuple field {0}")]
    DuplicateField(Ident),
}

impl ValueError {
    pub fn kind(&self) -> &'static str {
        match self {
            ValueError::IncompatibleAssignment { .. } => "incompatible-assignment",
            ValueError::IndexOutOfRange { .. } => "index-out-of-range",
            ValueError::NotIndexable(_) => "not-indexable",
            ValueError::NoSuchField(_) => "no-such-field",
            ValueError::TypeMismatch(_) => "type-mismatch",
            ValueError::DivisionByZero => "division-by-zero",
            ValueError::ArithOverflow => "arith-overflow",
            ValueError::NotHomogeneous(..) => "not-homogeneous",
            ValueError::DuplicateField(_) => "duplicate-field",
        }
    }
}

impl Value {
    pub fn str(s: impl Into<String>) -> Self {
        Value::Str(s.into())
    }

    /// Builds a list, checking that every element has a congruent type.
    pub fn list(items: Vec<Value>) -> Result<Self, ValueError> {
        check_homogeneous(&items)?;
        Ok(Value::List(items))
    }

    /// Builds a set: homogeneous, sorted, duplicates dropped.
    pub fn set(mut items: Vec<Value>) -> Result<Self, ValueError> {
        check_homogeneous(&items)?;
        items.sort_by(canonical_cmp);
        items.dedup_by(|a, b| canonical_cmp(a, b) == Ordering::Equal);
        Ok(Value::Set(items))
    }

    pub fn tuple(fields: Vec<(Ident, Value)>) -> Result<Self, ValueError> {
        for (i, (name, _)) in fields.iter().enumerate() {
            if fields[..i].iter().any(|(n, _)| n == name) {
                return Err(ValueError::DuplicateField(name.clone()));
            }
        }
        Ok(Value::Tuple(fields))
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Real(x) => Some(*x),
            _ => None,
        }
    }

    pub fn len(&self) -> Option<usize> {
        match self {
            Value::List(v) | Value::Set(v) => Some(v.len()),
            Value::Tuple(f) => Some(f.len()),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> Option<bool> {
        self.len().map(|n| n == 0)
    }
}

fn check_homogeneous(items: &[Value]) -> Result<(), ValueError> {
    let mut seen = PatchType::Unknown;
    for item in items {
        let t = type_of(item);
        seen = unify(&seen, &t).ok_or_else(|| ValueError::NotHomogeneous(seen.clone(), t))?;
    }
    Ok(())
}

/// Structural type of a value. Empty collections get an `Unknown` element.
pub fn type_of(v: &Value) -> PatchType {
    match v {
        Value::Int(_) => PatchType::Integer,
        Value::Real(_) => PatchType::Real,
        Value::Bool(_) => PatchType::Boolean,
        Value::Str(_) => PatchType::String,
        Value::List(items) => PatchType::list(element_type(items)),
        Value::Set(items) => PatchType::set(element_type(items)),
        Value::Tuple(fields) => {
            PatchType::Tuple(fields.iter().map(|(n, v)| (n.clone(), type_of(v))).collect())
        }
    }
}

fn element_type(items: &[Value]) -> PatchType {
    items.iter().fold(PatchType::Unknown, |acc, v| {
        unify(&acc, &type_of(v)).unwrap_or(acc)
    })
}

fn rank(v: &Value) -> u8 {
    match v {
        Value::Bool(_) => 0,
        Value::Int(_) | Value::Real(_) => 1,
        Value::Str(_) => 2,
        Value::List(_) => 3,
        Value::Set(_) => 4,
        Value::Tuple(_) => 5,
    }
}

/// Numeric ordering with integer/real widening.
pub fn numeric_cmp(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Some(x.cmp(y)),
        _ => a.as_f64()?.partial_cmp(&b.as_f64()?),
    }
}

/// Total order used for set storage and rendering. Numbers compare after
/// widening, strings by code point, collections lexicographically and
/// tuples by position.
pub fn canonical_cmp(a: &Value, b: &Value) -> Ordering {
    match (a, b) {
        (Value::Bool(x), Value::Bool(y)) => x.cmp(y),
        (Value::Str(x), Value::Str(y)) => x.cmp(y),
        (Value::List(x), Value::List(y)) | (Value::Set(x), Value::Set(y)) => lex_cmp(x, y),
        (Value::Tuple(x), Value::Tuple(y)) => {
            for ((_, p), (_, q)) in x.iter().zip(y) {
                match canonical_cmp(p, q) {
                    Ordering::Equal => {}
                    o => return o,
                }
            }
            x.len().cmp(&y.len())
        }
        _ if rank(a) == 1 && rank(b) == 1 => numeric_cmp(a, b).unwrap_or(Ordering::Equal),
        _ => rank(a).cmp(&rank(b)),
    }
}

fn lex_cmp(x: &[Value], y: &[Value]) -> Ordering {
    for (p, q) in x.iter().zip(y) {
        match canonical_cmp(p, q) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    x.len().cmp(&y.len())
}

/// Patch equality: numbers compare after widening, everything else
/// structurally. Tuples compare by position.
pub fn values_equal(a: &Value, b: &Value) -> bool {
    rank(a) == rank(b) && canonical_cmp(a, b) == Ordering::Equal
}

/// Converts `v` for storage in an object of type `target`.
///
/// Reals stored into integers truncate toward zero; integers stored into
/// reals widen.
pub fn assign_coerce(v: Value, target: &PatchType) -> Result<Value, ValueError> {
    let from = type_of(&v);
    if !compatible(&from, target) {
        return Err(ValueError::IncompatibleAssignment {
            from,
            to: target.clone(),
        });
    }
    match (v, target) {
        (Value::Real(x), PatchType::Integer) => real_to_int(x).map(Value::Int),
        (Value::Int(i), PatchType::Real) => Ok(Value::Real(i as f64)),
        (v, _) => Ok(v),
    }
}

/// Truncates toward zero, rejecting values outside the 64-bit range.
pub fn real_to_int(x: f64) -> Result<i64, ValueError> {
    let t = x.trunc();
    // 2^63 is exactly representable; anything at or above it overflows.
    if t.is_finite() && (-9_223_372_036_854_775_808.0..9_223_372_036_854_775_808.0).contains(&t) {
        Ok(t as i64)
    } else {
        Err(ValueError::ArithOverflow)
    }
}

/// 1-based positional access into a list or tuple.
pub fn index(c: &Value, i: &Value) -> Result<Value, ValueError> {
    let pos = checked_position(c, i)?;
    Ok(match c {
        Value::List(items) => items[pos].clone(),
        Value::Tuple(fields) => fields[pos].1.clone(),
        _ => unreachable!("checked_position accepts lists and tuples only"),
    })
}

/// Validates `i` against `c` and returns the 0-based position.
pub fn checked_position(c: &Value, i: &Value) -> Result<usize, ValueError> {
    let len = match c {
        Value::List(items) => items.len(),
        Value::Tuple(fields) => fields.len(),
        Value::Set(_) => {
            return Err(ValueError::NotIndexable(
                "set members can only be tested, not accessed".into(),
            ))
        }
        other => {
            return Err(ValueError::NotIndexable(format!(
                "a {} value has no elements",
                type_of(other)
            )))
        }
    };
    let Value::Int(index) = *i else {
        return Err(ValueError::TypeMismatch(format!(
            "index must be an integer, got {}",
            type_of(i)
        )));
    };
    if index < 1 || index as u64 > len as u64 {
        return Err(ValueError::IndexOutOfRange { index, len });
    }
    Ok((index - 1) as usize)
}

/// Named access into a tuple.
pub fn field(t: &Value, name: &Ident) -> Result<Value, ValueError> {
    match t {
        Value::Tuple(fields) => fields
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| ValueError::NoSuchField(name.clone())),
        other => Err(ValueError::TypeMismatch(format!(
            "field access on a {} value",
            type_of(other)
        ))),
    }
}

/// True when two values may be compared for equality.
pub fn comparable(a: &Value, b: &Value) -> bool {
    compatible(&type_of(a), &type_of(b))
}

/// Checks that `items` would form a homogeneous collection with `elem`.
pub fn fits_element(elem: &PatchType, v: &Value) -> bool {
    congruent(elem, &type_of(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ident::Ident;

    fn id(s: &str) -> Ident {
        Ident::new(s).unwrap()
    }

    fn address() -> Value {
        Value::tuple(vec![
            (id("no"), Value::Int(2)),
            (id("street"), Value::str("Main Road")),
            (id("city"), Value::str("New York")),
            (id("zip"), Value::Int(10026)),
        ])
        .unwrap()
    }

    #[test]
    fn list_indexing_is_one_based() {
        let x = Value::list(vec![Value::str("Moscow"), Value::str("Java"), Value::str("Pea")]).unwrap();
        assert_eq!(index(&x, &Value::Int(3)).unwrap(), Value::str("Pea"));
        assert_eq!(
            index(&x, &Value::Int(0)).unwrap_err().kind(),
            "index-out-of-range"
        );
        assert_eq!(
            index(&x, &Value::Int(4)).unwrap_err().kind(),
            "index-out-of-range"
        );
    }

    #[test]
    fn tuple_by_position_and_name() {
        let y = address();
        assert_eq!(index(&y, &Value::Int(4)).unwrap(), Value::Int(10026));
        assert_eq!(field(&y, &id("zip")).unwrap(), Value::Int(10026));
        assert_eq!(field(&y, &id("ZIP")).unwrap(), Value::Int(10026));
        let no_city = Value::tuple(vec![(id("zip"), Value::Int(1))]).unwrap();
        assert_eq!(
            field(&no_city, &id("city")).unwrap_err().kind(),
            "no-such-field"
        );
    }

    #[test]
    fn sets_and_scalars_are_not_indexable() {
        let s = Value::set(vec![Value::Real(87.2), Value::Real(2.87)]).unwrap();
        assert_eq!(index(&s, &Value::Int(1)).unwrap_err().kind(), "not-indexable");
        assert_eq!(
            index(&Value::Int(5), &Value::Int(1)).unwrap_err().kind(),
            "not-indexable"
        );
    }

    #[test]
    fn coercion_examples() {
        assert_eq!(
            assign_coerce(Value::Real(5.57), &PatchType::Integer).unwrap(),
            Value::Int(5)
        );
        assert_eq!(
            assign_coerce(Value::Int(48), &PatchType::Real).unwrap(),
            Value::Real(48.0)
        );
        assert_eq!(
            assign_coerce(Value::Real(-2.9), &PatchType::Integer).unwrap(),
            Value::Int(-2)
        );
        assert_eq!(
            assign_coerce(Value::str("x"), &PatchType::Integer)
                .unwrap_err()
                .kind(),
            "incompatible-assignment"
        );
        assert_eq!(
            assign_coerce(Value::Real(1e300), &PatchType::Integer)
                .unwrap_err()
                .kind(),
            "arith-overflow"
        );
    }

    #[test]
    fn truncation_matches_sign_times_floor_of_magnitude() {
        for x in [-2.9f64, -0.5, 0.0, 0.99, 5.57, -1e10 - 0.25, 123456.75] {
            let oracle = x.signum() * x.abs().floor();
            assert_eq!(real_to_int(x).unwrap() as f64, oracle, "{x}");
        }
    }

    #[test]
    fn type_of_examples() {
        let l = Value::list(vec![Value::Int(20), Value::Int(9), Value::Int(34)]).unwrap();
        assert_eq!(type_of(&l), PatchType::list(PatchType::Integer));
        assert_eq!(type_of(&Value::Bool(true)), PatchType::Boolean);
        assert_eq!(
            type_of(&address()).to_string(),
            "tuple(no: integer, street: string, city: string, zip: integer)"
        );
        assert_eq!(
            type_of(&Value::List(vec![])),
            PatchType::list(PatchType::Unknown)
        );
    }

    #[test]
    fn homogeneity_enforced() {
        assert!(Value::list(vec![Value::Int(1), Value::str("a")]).is_err());
        assert!(Value::list(vec![Value::Int(1), Value::Real(1.5)]).is_err());
        assert!(Value::list(vec![Value::List(vec![]), Value::list(vec![Value::Int(1)]).unwrap()]).is_ok());
        assert!(Value::tuple(vec![(id("a"), Value::Int(1)), (id("A"), Value::Int(2))]).is_err());
    }

    #[test]
    fn sets_are_sorted_and_unique() {
        let s = Value::set(vec![Value::str("Patch"), Value::str("Java"), Value::str("C"), Value::str("Java")]).unwrap();
        assert_eq!(
            s,
            Value::Set(vec![Value::str("C"), Value::str("Java"), Value::str("Patch")])
        );
        let z = Value::set(vec![Value::Real(0.0), Value::Real(-0.0)]).unwrap();
        assert_eq!(z.len(), Some(1));
    }

    #[test]
    fn widening_equality() {
        assert!(values_equal(&Value::Int(2), &Value::Real(2.0)));
        assert!(!values_equal(&Value::Int(2), &Value::Real(2.5)));
        assert!(!values_equal(&Value::Int(1), &Value::Bool(true)));
    }
}
