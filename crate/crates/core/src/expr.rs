//! Expressions and assignable places.
//!
//! Precedence, loosest first: `OR`, `AND`, `NOT`, comparisons and `∈`
//! (non-associative), set operators `∪ ∩ ∖ ×`, `+ -`, `* /`, prefix `-` and
//! `LEN`, `^` (right-associative), then postfix `[i]` and `.field`.

use std::fmt;

use thiserror::Error;

use crate::ident::{Ident, RESERVED};
use crate::literal::{parse_number, render_literal, Cursor, LiteralError};
use crate::ops::{BinaryOp, UnaryOp};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(Value),
    Var(Ident),
    Index(Box<Expr>, Box<Expr>),
    Field(Box<Expr>, Ident),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Access {
    Index(Expr),
    Field(Ident),
}

/// Something that can be written: a variable, optionally followed by
/// indexing and field selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Place {
    pub var: Ident,
    pub path: Vec<Access>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("expression syntax error at offset {offset}: {message}")]
pub struct ExprError {
    pub offset: usize,
    pub message: String,
}

impl From<LiteralError> for ExprError {
    fn from(e: LiteralError) -> Self {
        ExprError {
            offset: e.offset,
            message: e.message,
        }
    }
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(Ident::new(name).expect("valid identifier"))
    }

    pub fn int(i: i64) -> Expr {
        Expr::Lit(Value::Int(i))
    }

    pub fn bin(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn un(op: UnaryOp, a: Expr) -> Expr {
        Expr::Unary(op, Box::new(a))
    }

    pub fn index(c: Expr, i: Expr) -> Expr {
        Expr::Index(Box::new(c), Box::new(i))
    }

    /// Every variable the expression reads, in first-occurrence order.
    pub fn vars(&self) -> Vec<Ident> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<Ident>) {
        match self {
            Expr::Lit(_) => {}
            Expr::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Expr::Index(a, b) | Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Field(a, _) | Expr::Unary(_, a) => a.collect_vars(out),
        }
    }

    /// Converts a variable/index/field chain into a place.
    pub fn to_place(&self) -> Option<Place> {
        match self {
            Expr::Var(v) => Some(Place {
                var: v.clone(),
                path: Vec::new(),
            }),
            Expr::Index(c, i) => {
                let mut p = c.to_place()?;
                p.path.push(Access::Index((**i).clone()));
                Some(p)
            }
            Expr::Field(c, f) => {
                let mut p = c.to_place()?;
                p.path.push(Access::Field(f.clone()));
                Some(p)
            }
            _ => None,
        }
    }

    /// True for the sources an assignment may copy from: constants and
    /// places. Index expressions inside a place may compute positions.
    pub fn is_copyable(&self) -> bool {
        matches!(self, Expr::Lit(_)) || self.to_place().is_some()
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Lit(Value::Int(i)) if *i < 0 => PREC_UNARY,
            Expr::Lit(Value::Real(x)) if x.is_sign_negative() => PREC_UNARY,
            Expr::Lit(_) | Expr::Var(_) => PREC_PRIMARY,
            Expr::Index(..) | Expr::Field(..) => PREC_POSTFIX,
            Expr::Unary(UnaryOp::Not, _) => PREC_NOT,
            Expr::Unary(..) => PREC_UNARY,
            Expr::Binary(op, ..) => binary_precedence(*op),
        }
    }
}

impl Place {
    pub fn var(name: &str) -> Place {
        Place {
            var: Ident::new(name).expect("valid identifier"),
            path: Vec::new(),
        }
    }

    pub fn to_expr(&self) -> Expr {
        let mut e = Expr::Var(self.var.clone());
        for a in &self.path {
            e = match a {
                Access::Index(i) => Expr::Index(Box::new(e), Box::new(i.clone())),
                Access::Field(f) => Expr::Field(Box::new(e), f.clone()),
            };
        }
        e
    }

    pub fn is_whole_var(&self) -> bool {
        self.path.is_empty()
    }
}

const PREC_OR: u8 = 1;
const PREC_AND: u8 = 2;
const PREC_NOT: u8 = 3;
const PREC_CMP: u8 = 4;
const PREC_SET: u8 = 5;
const PREC_ADD: u8 = 6;
const PREC_MUL: u8 = 7;
const PREC_UNARY: u8 = 8;
const PREC_POW: u8 = 9;
const PREC_POSTFIX: u8 = 10;
const PREC_PRIMARY: u8 = 11;

fn binary_precedence(op: BinaryOp) -> u8 {
    use BinaryOp::*;
    match op {
        Or => PREC_OR,
        And => PREC_AND,
        Lt | Gt | Eq | Le | Ge | In => PREC_CMP,
        Union | Intersect | Diff | Cross => PREC_SET,
        Add | Sub => PREC_ADD,
        Mul | Div => PREC_MUL,
        Pow => PREC_POW,
    }
}

// Printing

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if e.precedence() < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(v) => f.write_str(&render_literal(v)),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Index(c, i) => {
                write_operand(f, c, PREC_POSTFIX)?;
                write!(f, "[{i}]")
            }
            Expr::Field(c, name) => {
                write_operand(f, c, PREC_POSTFIX)?;
                write!(f, ".{name}")
            }
            Expr::Unary(UnaryOp::Neg, a) => {
                f.write_str("-")?;
                // `-5` would read back as a literal, `--x` as nothing at all.
                let starts_with_minus = matches!(**a, Expr::Unary(UnaryOp::Neg, _))
                    || matches!(**a, Expr::Lit(Value::Int(_) | Value::Real(_)))
                    || a.precedence() < PREC_UNARY;
                if starts_with_minus {
                    write!(f, "({a})")
                } else {
                    write!(f, "{a}")
                }
            }
            Expr::Unary(op, a) => {
                let min = if *op == UnaryOp::Not { PREC_NOT } else { PREC_UNARY };
                write!(f, "{op} ")?;
                write_operand(f, a, min)
            }
            Expr::Binary(op, a, b) => {
                let p = binary_precedence(*op);
                let (lmin, rmin) = match op {
                    BinaryOp::Pow => (PREC_POSTFIX, PREC_UNARY),
                    _ if p == PREC_CMP => (p + 1, p + 1),
                    _ => (p, p + 1),
                };
                write_operand(f, a, lmin)?;
                write!(f, " {op} ")?;
                write_operand(f, b, rmin)
            }
        }
    }
}

impl fmt::Display for Place {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_expr())
    }
}

// Parsing

pub fn parse_expr(text: &str) -> Result<Expr, ExprError> {
    let mut p = Parser { c: Cursor::new(text) };
    let e = p.or()?;
    p.c.skip_ws();
    if !p.c.at_end() {
        return Err(p.error("unexpected text after expression"));
    }
    Ok(e)
}

pub fn parse_place(text: &str) -> Result<Place, ExprError> {
    let e = parse_expr(text)?;
    e.to_place().ok_or_else(|| ExprError {
        offset: 0,
        message: "expected a variable, element or field".into(),
    })
}

impl std::str::FromStr for Expr {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expr(s)
    }
}

impl std::str::FromStr for Place {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_place(s)
    }
}

struct Parser<'a> {
    c: Cursor<'a>,
}

const SYMBOL_OPS: &[(&str, BinaryOp)] = &[
    ("<=", BinaryOp::Le),
    (">=", BinaryOp::Ge),
    ("≤", BinaryOp::Le),
    ("≥", BinaryOp::Ge),
    ("<", BinaryOp::Lt),
    (">", BinaryOp::Gt),
    ("=", BinaryOp::Eq),
    ("∈", BinaryOp::In),
    ("∪", BinaryOp::Union),
    ("∩", BinaryOp::Intersect),
    ("∖", BinaryOp::Diff),
    ("\\", BinaryOp::Diff),
    ("×", BinaryOp::Cross),
    ("+", BinaryOp::Add),
    ("-", BinaryOp::Sub),
    ("−", BinaryOp::Sub),
    ("*", BinaryOp::Mul),
    ("/", BinaryOp::Div),
    ("^", BinaryOp::Pow),
    ("∧", BinaryOp::And),
    ("∨", BinaryOp::Or),
];

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> ExprError {
        ExprError {
            offset: self.c.pos,
            message: message.into(),
        }
    }

    /// Peeks the next binary operator without consuming it.
    fn peek_op(&mut self) -> Option<(BinaryOp, usize)> {
        self.c.skip_ws();
        let rest = self.c.rest();
        for (sym, op) in SYMBOL_OPS {
            if rest.starts_with(sym) {
                return Some((*op, sym.len()));
            }
        }
        let save = self.c.pos;
        let w = self.c.word();
        self.c.pos = save;
        let op = match w.to_ascii_uppercase().as_str() {
            "AND" => BinaryOp::And,
            "OR" => BinaryOp::Or,
            "IN" => BinaryOp::In,
            "UNION" => BinaryOp::Union,
            "INTERSECT" => BinaryOp::Intersect,
            "EXCEPT" => BinaryOp::Diff,
            "CROSS" => BinaryOp::Cross,
            _ => return None,
        };
        Some((op, w.len()))
    }

    fn binary_level(
        &mut self,
        level: u8,
        next: fn(&mut Self) -> Result<Expr, ExprError>,
    ) -> Result<Expr, ExprError> {
        let mut lhs = next(self)?;
        while let Some((op, len)) = self.peek_op() {
            if binary_precedence(op) != level {
                break;
            }
            self.c.pos += len;
            let rhs = next(self)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Expr, ExprError> {
        self.binary_level(PREC_OR, Self::and)
    }

    fn and(&mut self) -> Result<Expr, ExprError> {
        self.binary_level(PREC_AND, Self::not)
    }

    fn not(&mut self) -> Result<Expr, ExprError> {
        self.c.skip_ws();
        if self.c.rest().starts_with('¬') {
            self.c.pos += '¬'.len_utf8();
            return Ok(Expr::un(UnaryOp::Not, self.not()?));
        }
        if self.c.peek_word().eq_ignore_ascii_case("NOT") {
            self.c.word();
            return Ok(Expr::un(UnaryOp::Not, self.not()?));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, ExprError> {
        let lhs = self.set_level()?;
        match self.peek_op() {
            Some((op, len)) if binary_precedence(op) == PREC_CMP => {
                self.c.pos += len;
                let rhs = self.set_level()?;
                if let Some((op2, _)) = self.peek_op() {
                    if binary_precedence(op2) == PREC_CMP {
                        return Err(self.error("comparisons do not chain; add parentheses"));
                    }
                }
                Ok(Expr::bin(op, lhs, rhs))
            }
            _ => Ok(lhs),
        }
    }

    fn set_level(&mut self) -> Result<Expr, ExprError> {
        self.binary_level(PREC_SET, Self::additive)
    }

    fn additive(&mut self) -> Result<Expr, ExprError> {
        self.binary_level(PREC_ADD, Self::multiplicative)
    }

    fn multiplicative(&mut self) -> Result<Expr, ExprError> {
        self.binary_level(PREC_MUL, Self::unary)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        self.c.skip_ws();
        let rest = self.c.rest();
        let minus = if rest.starts_with('-') {
            Some(1)
        } else if rest.starts_with('−') {
            Some('−'.len_utf8())
        } else {
            None
        };
        if let Some(len) = minus {
            let start = self.c.pos;
            self.c.pos += len;
            // A minus directly before a number folds into the literal,
            // unless the number is the base of a power.
            if self.c.rest().starts_with(|c: char| c.is_ascii_digit()) {
                let (tok, real) = self.c.number_token()?;
                let after = self.c.pos;
                if self.peek_op().map(|(op, _)| op) != Some(BinaryOp::Pow) {
                    let text = format!("-{tok}");
                    let v = parse_number(&text, real).map_err(|m| ExprError {
                        offset: start,
                        message: m,
                    })?;
                    self.c.pos = after;
                    return Ok(Expr::Lit(v));
                }
                self.c.pos = start + len;
            }
            return Ok(Expr::un(UnaryOp::Neg, self.unary()?));
        }
        if self.c.peek_word().eq_ignore_ascii_case("LEN") {
            self.c.word();
            return Ok(Expr::un(UnaryOp::Len, self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.postfix()?;
        if let Some((BinaryOp::Pow, len)) = self.peek_op() {
            self.c.pos += len;
            let exp = self.unary()?;
            return Ok(Expr::bin(BinaryOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn postfix(&mut self) -> Result<Expr, ExprError> {
        let mut e = self.primary()?;
        loop {
            if self.c.eat("[") {
                let i = self.or()?;
                if !self.c.eat("]") {
                    return Err(self.error("expected ']'"));
                }
                e = Expr::index(e, i);
            } else if self.c.eat(".") {
                let at = self.c.pos;
                let name = self.c.word();
                let name = Ident::new(name).map_err(|err| ExprError {
                    offset: at,
                    message: err.to_string(),
                })?;
                e = Expr::Field(Box::new(e), name);
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        self.c.skip_ws();
        let Some(ch) = self.c.peek() else {
            return Err(self.error("expected an operand"));
        };
        match ch {
            '(' => {
                self.c.pos += 1;
                let e = self.or()?;
                if !self.c.eat(")") {
                    return Err(self.error("expected ')'"));
                }
                Ok(e)
            }
            '"' | '[' | '{' | '<' | '⟨' => Ok(Expr::Lit(self.c.value(None)?)),
            c if c.is_ascii_digit() => {
                let (tok, real) = self.c.number_token()?;
                let at = self.c.pos;
                parse_number(tok, real).map(Expr::Lit).map_err(|m| ExprError {
                    offset: at - tok.len(),
                    message: m,
                })
            }
            _ => {
                let at = self.c.pos;
                let w = self.c.word();
                if w.is_empty() {
                    return Err(self.error(format!("unexpected character {ch:?}")));
                }
                match w.to_ascii_uppercase().as_str() {
                    "TRUE" => return Ok(Expr::Lit(Value::Bool(true))),
                    "FALSE" => return Ok(Expr::Lit(Value::Bool(false))),
                    _ => {}
                }
                if RESERVED.contains(&w.to_ascii_lowercase().as_str()) {
                    self.c.pos = at;
                    return Err(self.error(format!("unexpected keyword {w}")));
                }
                Ident::new(w).map(Expr::Var).map_err(|e| ExprError {
                    offset: at,
                    message: e.to_string(),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rt(src: &str) -> String {
        parse_expr(src).unwrap().to_string()
    }

    #[test]
    fn canonical_spelling() {
        assert_eq!(rt("list[i]>list[i+1]"), "list[i] > list[i + 1]");
        assert_eq!(rt("not Sorted"), "NOT sorted");
        assert_eq!(rt("len LIST - 1"), "LEN list - 1");
        assert_eq!(rt("a <= b"), "a ≤ b");
        assert_eq!(rt("a union b intersect c"), "a ∪ b ∩ c");
        assert_eq!(rt("x in s"), "x ∈ s");
        assert_eq!(rt("y.ZIP"), "y.zip");
        assert_eq!(rt("a \\ b"), "a ∖ b");
    }

    #[test]
    fn precedence_and_parentheses() {
        assert_eq!(rt("(a + b) * c"), "(a + b) * c");
        assert_eq!(rt("a + (b * c)"), "a + b * c");
        assert_eq!(rt("a - (b - c)"), "a - (b - c)");
        assert_eq!(rt("(a - b) - c"), "a - b - c");
        assert_eq!(rt("2 ^ 3 ^ 2"), "2 ^ 3 ^ 2");
        assert_eq!(rt("(2 ^ 3) ^ 2"), "(2 ^ 3) ^ 2");
        assert_eq!(rt("NOT a AND b"), "NOT a AND b");
        assert_eq!(rt("NOT (a AND b)"), "NOT (a AND b)");
        assert_eq!(rt("(a < b) = c"), "(a < b) = c");
        assert!(parse_expr("a < b < c").is_err());
        let e = parse_expr("-x ^ 2").unwrap();
        assert!(matches!(e, Expr::Unary(UnaryOp::Neg, _)));
    }

    #[test]
    fn negative_literals() {
        assert_eq!(parse_expr("-5").unwrap(), Expr::int(-5));
        assert_eq!(
            parse_expr("-9223372036854775808").unwrap(),
            Expr::int(i64::MIN)
        );
        let p = parse_expr("-2 ^ 2").unwrap();
        assert_eq!(
            p,
            Expr::un(
                UnaryOp::Neg,
                Expr::bin(BinaryOp::Pow, Expr::int(2), Expr::int(2))
            )
        );
        assert_eq!(p.to_string(), "-2 ^ 2");
        let base = Expr::bin(BinaryOp::Pow, Expr::int(-2), Expr::int(2));
        assert_eq!(base.to_string(), "(-2) ^ 2");
        assert_eq!(parse_expr(&base.to_string()).unwrap(), base);
        let neg_lit = Expr::un(UnaryOp::Neg, Expr::int(5));
        assert_eq!(parse_expr(&neg_lit.to_string()).unwrap(), neg_lit);
        let double = Expr::un(UnaryOp::Neg, Expr::un(UnaryOp::Neg, Expr::var("x")));
        assert_eq!(parse_expr(&double.to_string()).unwrap(), double);
        assert_eq!(rt("a - -5"), "a - -5");
    }

    #[test]
    fn literals_inside_expressions() {
        assert_eq!(rt(r#"x = ["Moscow", "Java", "Pea"]"#), r#"x = ["Moscow", "Java", "Pea"]"#);
        assert_eq!(rt("{3, 1} ∪ {2}"), "{1, 3} ∪ {2}");
        assert_eq!(rt(r#"<no: 2, street: "Main Road">.no"#), r#"<no: 2, street: "Main Road">.no"#);
        assert_eq!(rt("2.0 ∈ {87.2, 2.87}"), "2.0 ∈ {2.87, 87.2}");
        assert_eq!(rt("1 < 2 AND TRUE"), "1 < 2 AND TRUE");
    }

    #[test]
    fn places() {
        let p = parse_place("list[i + 1]").unwrap();
        assert_eq!(p.var.as_str(), "list");
        assert_eq!(p.to_string(), "list[i + 1]");
        assert!(parse_place("a + 1").is_err());
        assert!(parse_expr("y.zip").unwrap().is_copyable());
        assert!(!parse_expr("y + 1").unwrap().is_copyable());
    }

    #[test]
    fn vars_in_order() {
        let e = parse_expr("b + a * b[c]").unwrap();
        let names: Vec<_> = e.vars().iter().map(|v| v.to_string()).collect();
        assert_eq!(names, ["b", "a", "c"]);
    }

    #[test]
    fn errors_have_offsets() {
        let e = parse_expr("a + ").unwrap_err();
        assert_eq!(e.offset, 4);
        assert!(parse_expr("a +* b").is_err());
        assert!(parse_expr("AND").is_err());
        assert!(parse_expr("x[1").is_err());
        assert!(parse_expr("(a").is_err());
        assert!(parse_expr("a b").is_err());
    }
}
