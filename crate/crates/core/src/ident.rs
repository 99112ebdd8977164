//! Case-insensitive identifiers.
//!
//! Every name in a Patch program (variables, data objects, modules, tuple
//! fields) is compared after case folding. [`Ident`] only ever holds the
//! folded form, so equality and hashing are plain string operations.

use std::fmt;

use thiserror::Error;

/// Words with a fixed meaning in expression text. They cannot name objects.
pub const RESERVED: &[&str] = &[
    "true",
    "false",
    "and",
    "or",
    "not",
    "in",
    "len",
    "union",
    "intersect",
    "except",
    "cross",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed identifier {raw:?}: {reason}")]
pub struct IdentError {
    pub raw: String,
    pub reason: &'static str,
}

impl IdentError {
    pub fn kind(&self) -> &'static str {
        "malformed-identifier"
    }
}

/// A case-folded identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ident(String);

impl Ident {
    pub fn new(raw: &str) -> Result<Self, IdentError> {
        normalize_identifier(raw)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Ident {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Folds `raw` to its canonical form.
///
/// Identifiers start with an ASCII letter and continue with ASCII letters,
/// digits or underscores. Two spellings that differ only in case name the
/// same object.
pub fn normalize_identifier(raw: &str) -> Result<Ident, IdentError> {
    let err = |reason| IdentError {
        raw: raw.to_string(),
        reason,
    };
    let mut chars = raw.chars();
    match chars.next() {
        None => return Err(err("empty")),
        Some(c) if !c.is_ascii_alphabetic() => return Err(err("must start with a letter")),
        Some(_) => {}
    }
    if !chars.all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(err("only letters, digits and underscore are allowed"));
    }
    let folded = raw.to_ascii_lowercase();
    if RESERVED.contains(&folded.as_str()) {
        return Err(err("reserved word"));
    }
    Ok(Ident(folded))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_case() {
        assert_eq!(normalize_identifier("Zip").unwrap().as_str(), "zip");
        assert_eq!(normalize_identifier("x").unwrap().as_str(), "x");
        assert_eq!(
            normalize_identifier("Loop_Counter1").unwrap().as_str(),
            "loop_counter1"
        );
    }

    #[test]
    fn case_fold_oracle() {
        // Per-character fold, checked independently of to_ascii_lowercase.
        let raw = "Loop_Counter1";
        let expected: String = raw
            .chars()
            .map(|c| {
                if c.is_ascii_uppercase() {
                    ((c as u8) + 32) as char
                } else {
                    c
                }
            })
            .collect();
        assert_eq!(normalize_identifier(raw).unwrap().as_str(), expected);
    }

    #[test]
    fn spellings_collide() {
        assert_eq!(Ident::new("SORT").unwrap(), Ident::new("sort").unwrap());
    }

    #[test]
    fn rejects_malformed() {
        for raw in ["", "1abc", "_x", "a-b", "a b", "é", "TRUE", "Len"] {
            let e = normalize_identifier(raw).unwrap_err();
            assert_eq!(e.kind(), "malformed-identifier", "{raw}");
        }
    }
}
