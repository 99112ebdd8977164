//! Arithmetic, comparison, logical and set operators.

use std::cmp::Ordering;
use std::fmt;

use crate::ident::Ident;
use crate::types::congruent;
use crate::value::{canonical_cmp, numeric_cmp, type_of, values_equal, Value, ValueError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Lt,
    Gt,
    Eq,
    Le,
    Ge,
    And,
    Or,
    In,
    Diff,
    Union,
    Intersect,
    Cross,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Not,
    Len,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 17] = [
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Div,
        BinaryOp::Pow,
        BinaryOp::Lt,
        BinaryOp::Gt,
        BinaryOp::Eq,
        BinaryOp::Le,
        BinaryOp::Ge,
        BinaryOp::And,
        BinaryOp::Or,
        BinaryOp::In,
        BinaryOp::Diff,
        BinaryOp::Union,
        BinaryOp::Intersect,
        BinaryOp::Cross,
    ];

    /// Canonical spelling used in documents and trace events.
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
            BinaryOp::Lt => "<",
            BinaryOp::Gt => ">",
            BinaryOp::Eq => "=",
            BinaryOp::Le => "≤",
            BinaryOp::Ge => "≥",
            BinaryOp::And => "AND",
            BinaryOp::Or => "OR",
            BinaryOp::In => "∈",
            BinaryOp::Diff => "∖",
            BinaryOp::Union => "∪",
            BinaryOp::Intersect => "∩",
            BinaryOp::Cross => "×",
        }
    }

    /// Accepts the canonical symbol and the keyboard alternatives.
    pub fn from_symbol(s: &str) -> Option<Self> {
        let op = match s.to_ascii_uppercase().as_str() {
            "+" => BinaryOp::Add,
            "-" | "−" => BinaryOp::Sub,
            "*" => BinaryOp::Mul,
            "/" => BinaryOp::Div,
            "^" => BinaryOp::Pow,
            "<" => BinaryOp::Lt,
            ">" => BinaryOp::Gt,
            "=" => BinaryOp::Eq,
            "≤" | "<=" => BinaryOp::Le,
            "≥" | ">=" => BinaryOp::Ge,
            "AND" | "∧" => BinaryOp::And,
            "OR" | "∨" => BinaryOp::Or,
            "∈" | "IN" => BinaryOp::In,
            "∖" | "\\" | "EXCEPT" => BinaryOp::Diff,
            "∪" | "UNION" => BinaryOp::Union,
            "∩" | "INTERSECT" => BinaryOp::Intersect,
            "×" | "CROSS" => BinaryOp::Cross,
            _ => return None,
        };
        Some(op)
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinaryOp::Lt | BinaryOp::Gt | BinaryOp::Eq | BinaryOp::Le | BinaryOp::Ge
        )
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(
            self,
            BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div | BinaryOp::Pow
        )
    }

    pub fn is_set_op(self) -> bool {
        matches!(
            self,
            BinaryOp::Diff | BinaryOp::Union | BinaryOp::Intersect | BinaryOp::Cross
        )
    }
}

impl UnaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Not => "NOT",
            UnaryOp::Len => "LEN",
        }
    }
}

impl fmt::Display for BinaryOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl fmt::Display for UnaryOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

fn mismatch(op: impl fmt::Display, a: &Value, b: &Value) -> ValueError {
    ValueError::TypeMismatch(format!(
        "operator {op} does not apply to {} and {}",
        type_of(a),
        type_of(b)
    ))
}

fn finite(x: f64) -> Result<Value, ValueError> {
    if x.is_finite() {
        Ok(Value::Real(x))
    } else {
        Err(ValueError::ArithOverflow)
    }
}

fn numbers(op: BinaryOp, a: &Value, b: &Value) -> Result<(f64, f64), ValueError> {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => Ok((x, y)),
        _ => Err(mismatch(op, a, b)),
    }
}

fn set_items<'a>(op: BinaryOp, a: &'a Value, b: &'a Value) -> Result<(&'a [Value], &'a [Value]), ValueError> {
    match (a, b) {
        (Value::Set(x), Value::Set(y)) => Ok((x, y)),
        _ => Err(mismatch(op, a, b)),
    }
}

/// Applies a binary operator to two evaluated operands.
///
/// `AND`/`OR` here evaluate strictly; short-circuiting is the evaluator's
/// job.
pub fn apply_binary(op: BinaryOp, a: &Value, b: &Value) -> Result<Value, ValueError> {
    use BinaryOp::*;
    match op {
        Add | Sub | Mul => match (a, b) {
            (Value::Int(x), Value::Int(y)) => {
                let r = match op {
                    Add => x.checked_add(*y),
                    Sub => x.checked_sub(*y),
                    _ => x.checked_mul(*y),
                };
                r.map(Value::Int).ok_or(ValueError::ArithOverflow)
            }
            _ => {
                let (x, y) = numbers(op, a, b)?;
                finite(match op {
                    Add => x + y,
                    Sub => x - y,
                    _ => x * y,
                })
            }
        },
        Div => {
            let (x, y) = numbers(op, a, b)?;
            if y == 0.0 {
                return Err(ValueError::DivisionByZero);
            }
            finite(x / y)
        }
        Pow => {
            let (x, y) = numbers(op, a, b)?;
            finite(x.powf(y))
        }
        Lt | Gt | Le | Ge => {
            let ord = ordered_cmp(a, b).ok_or_else(|| mismatch(op, a, b))?;
            Ok(Value::Bool(match op {
                Lt => ord == Ordering::Less,
                Gt => ord == Ordering::Greater,
                Le => ord != Ordering::Greater,
                _ => ord != Ordering::Less,
            }))
        }
        Eq => {
            if !crate::value::comparable(a, b) {
                return Err(mismatch(op, a, b));
            }
            Ok(Value::Bool(values_equal(a, b)))
        }
        And | Or => match (a, b) {
            (Value::Bool(x), Value::Bool(y)) => Ok(Value::Bool(if op == And { *x && *y } else { *x || *y })),
            _ => Err(mismatch(op, a, b)),
        },
        In => {
            let Value::Set(items) = b else {
                return Err(mismatch(op, a, b));
            };
            let elem = type_of(b);
            let elem = elem.element().expect("set type has an element");
            if !crate::types::compatible(&type_of(a), elem) {
                return Err(mismatch(op, a, b));
            }
            Ok(Value::Bool(items.iter().any(|x| values_equal(a, x))))
        }
        Union | Intersect | Diff => {
            let (x, y) = set_items(op, a, b)?;
            if !congruent(&type_of(a), &type_of(b)) {
                return Err(mismatch(op, a, b));
            }
            let items: Vec<Value> = match op {
                Union => x.iter().chain(y).cloned().collect(),
                Intersect => x
                    .iter()
                    .filter(|v| y.iter().any(|w| values_equal(v, w)))
                    .cloned()
                    .collect(),
                _ => x
                    .iter()
                    .filter(|v| !y.iter().any(|w| values_equal(v, w)))
                    .cloned()
                    .collect(),
            };
            Value::set(items)
        }
        Cross => {
            let (x, y) = set_items(op, a, b)?;
            let first = Ident::new("first").expect("valid identifier");
            let second = Ident::new("second").expect("valid identifier");
            let pairs = x
                .iter()
                .flat_map(|p| {
                    y.iter().map(|q| {
                        Value::Tuple(vec![(first.clone(), p.clone()), (second.clone(), q.clone())])
                    })
                })
                .collect();
            Value::set(pairs)
        }
    }
}

/// Ordering for `<`, `>`, `≤`, `≥`: numbers (widened), strings by code
/// point, booleans with FALSE first. `None` for anything else.
pub fn ordered_cmp(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Str(_), Value::Str(_)) | (Value::Bool(_), Value::Bool(_)) => Some(canonical_cmp(a, b)),
        _ => numeric_cmp(a, b),
    }
}

pub fn apply_unary(op: UnaryOp, a: &Value) -> Result<Value, ValueError> {
    let bad = || {
        ValueError::TypeMismatch(format!(
            "operator {op} does not apply to {}",
            type_of(a)
        ))
    };
    match (op, a) {
        (UnaryOp::Neg, Value::Int(i)) => i.checked_neg().map(Value::Int).ok_or(ValueError::ArithOverflow),
        (UnaryOp::Neg, Value::Real(x)) => Ok(Value::Real(-x)),
        (UnaryOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
        (UnaryOp::Len, Value::List(v) | Value::Set(v)) => Ok(Value::Int(v.len() as i64)),
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(items: &[i64]) -> Value {
        Value::set(items.iter().map(|&i| Value::Int(i)).collect()).unwrap()
    }

    #[test]
    fn worked_arithmetic() {
        assert_eq!(
            apply_binary(BinaryOp::Add, &Value::Int(2), &Value::Real(3.57)).unwrap(),
            Value::Real(5.57)
        );
        assert_eq!(
            apply_binary(BinaryOp::Add, &Value::Int(45), &Value::Int(3)).unwrap(),
            Value::Int(48)
        );
        assert_eq!(
            apply_binary(BinaryOp::Div, &Value::Int(1), &Value::Int(2)).unwrap(),
            Value::Real(0.5)
        );
        assert_eq!(
            apply_binary(BinaryOp::Pow, &Value::Int(2), &Value::Int(3)).unwrap(),
            Value::Real(8.0)
        );
    }

    #[test]
    fn arithmetic_errors() {
        assert_eq!(
            apply_binary(BinaryOp::Div, &Value::Int(1), &Value::Int(0)).unwrap_err().kind(),
            "division-by-zero"
        );
        assert_eq!(
            apply_binary(BinaryOp::Div, &Value::Real(1.0), &Value::Real(-0.0)).unwrap_err().kind(),
            "division-by-zero"
        );
        assert_eq!(
            apply_binary(BinaryOp::Add, &Value::Int(i64::MAX), &Value::Int(1)).unwrap_err().kind(),
            "arith-overflow"
        );
        assert_eq!(
            apply_binary(BinaryOp::Pow, &Value::Real(-8.0), &Value::Real(0.5)).unwrap_err().kind(),
            "arith-overflow"
        );
        assert_eq!(
            apply_binary(BinaryOp::Add, &Value::str("a"), &Value::Int(1)).unwrap_err().kind(),
            "type-mismatch"
        );
        assert_eq!(apply_unary(UnaryOp::Neg, &Value::Int(i64::MIN)).unwrap_err().kind(), "arith-overflow");
    }

    #[test]
    fn set_examples() {
        let a = Value::set(vec![Value::Real(87.2)]).unwrap();
        let b = Value::set(vec![Value::Real(2.87)]).unwrap();
        let u = apply_binary(BinaryOp::Union, &a, &b).unwrap();
        assert_eq!(u, Value::Set(vec![Value::Real(2.87), Value::Real(87.2)]));
        let both = Value::set(vec![Value::Real(87.2), Value::Real(2.87)]).unwrap();
        assert_eq!(
            apply_binary(BinaryOp::In, &Value::Real(2.0), &both).unwrap(),
            Value::Bool(false)
        );
        assert_eq!(
            apply_binary(BinaryOp::In, &Value::Int(2), &both).unwrap(),
            Value::Bool(false)
        );
        let with_two = Value::set(vec![Value::Real(2.0)]).unwrap();
        assert_eq!(
            apply_binary(BinaryOp::In, &Value::Int(2), &with_two).unwrap(),
            Value::Bool(true)
        );
        assert_eq!(
            apply_binary(BinaryOp::In, &Value::str("2"), &both).unwrap_err().kind(),
            "type-mismatch"
        );
    }

    #[test]
    fn cross_product_shape() {
        let p = apply_binary(BinaryOp::Cross, &set(&[1, 2]), &set(&[3])).unwrap();
        assert_eq!(
            crate::value::type_of(&p).to_string(),
            "set(tuple(first: integer, second: integer))"
        );
        assert_eq!(p.len(), Some(2));
    }

    #[test]
    fn comparisons() {
        let t = |op, a: Value, b: Value| apply_binary(op, &a, &b).unwrap();
        assert_eq!(t(BinaryOp::Lt, Value::str("Java"), Value::str("Pea")), Value::Bool(true));
        assert_eq!(t(BinaryOp::Lt, Value::str("Z"), Value::str("a")), Value::Bool(true));
        assert_eq!(t(BinaryOp::Ge, Value::Int(2), Value::Real(2.0)), Value::Bool(true));
        assert_eq!(t(BinaryOp::Eq, set(&[1, 2]), set(&[2, 1])), Value::Bool(true));
        assert!(apply_binary(BinaryOp::Lt, &set(&[1]), &set(&[2])).is_err());
        assert!(apply_binary(BinaryOp::Eq, &Value::Int(1), &Value::str("1")).is_err());
    }

    fn small_set() -> impl Strategy<Value = Value> {
        proptest::collection::vec(-5i64..5, 0..6).prop_map(|v| set(&v))
    }

    proptest! {
        #[test]
        fn set_laws(a in small_set(), b in small_set()) {
            let ab = apply_binary(BinaryOp::Union, &a, &b).unwrap();
            let ba = apply_binary(BinaryOp::Union, &b, &a).unwrap();
            prop_assert_eq!(ab, ba);

            let inter = apply_binary(BinaryOp::Intersect, &a, &b).unwrap();
            if let Value::Set(items) = &inter {
                for x in items {
                    prop_assert_eq!(apply_binary(BinaryOp::In, x, &a).unwrap(), Value::Bool(true));
                }
            }

            let diff = apply_binary(BinaryOp::Diff, &a, &b).unwrap();
            if let Value::Set(items) = &diff {
                for x in items {
                    prop_assert_eq!(apply_binary(BinaryOp::In, x, &b).unwrap(), Value::Bool(false));
                }
            }

            let cross = apply_binary(BinaryOp::Cross, &a, &b).unwrap();
            prop_assert_eq!(cross.len().unwrap(), a.len().unwrap() * b.len().unwrap());
        }

        #[test]
        fn comparator_trichotomy(x in -1000i64..1000, y in -1000.0f64..1000.0, pick in 0u8..3) {
            let (a, b) = match pick {
                0 => (Value::Int(x), Value::Real(y)),
                1 => (Value::Int(x), Value::Int(y as i64)),
                _ => (Value::Real(y), Value::Real(x as f64)),
            };
            let holds = |op| apply_binary(op, &a, &b).unwrap() == Value::Bool(true);
            let count = [BinaryOp::Lt, BinaryOp::Eq, BinaryOp::Gt].into_iter().filter(|&op| holds(op)).count();
            prop_assert_eq!(count, 1);
        }

        #[test]
        fn widening_round_trip(i in -(1i64 << 53)..(1i64 << 53)) {
            use crate::types::PatchType;
            use crate::value::assign_coerce;
            let r = assign_coerce(Value::Int(i), &PatchType::Real).unwrap();
            prop_assert_eq!(assign_coerce(r, &PatchType::Integer).unwrap(), Value::Int(i));
        }
    }
}
