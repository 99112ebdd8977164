//! Call binding by schema mapping.
//!
//! Actuals bind to a callee's caller-bound inputs by name first, then by
//! type: an actual with exactly one compatible free formal takes it, and a
//! formal with exactly one compatible free actual takes that. This repeats
//! until nothing changes. Whatever is left is either ambiguous (several
//! bijections remain) or unresolvable (none does).

use thiserror::Error;

use crate::ident::Ident;
use crate::model::{ModuleDef, PatchProgram};
use crate::types::{compatible, PatchType};

#[derive(Debug, Clone, PartialEq)]
pub struct ActualSig {
    pub name: Option<Ident>,
    pub ty: PatchType,
}

impl ActualSig {
    pub fn named(name: &str, ty: PatchType) -> Self {
        ActualSig {
            name: Some(Ident::new(name).expect("valid identifier")),
            ty,
        }
    }

    pub fn unnamed(ty: PatchType) -> Self {
        ActualSig { name: None, ty }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CallSignature {
    pub actuals: Vec<ActualSig>,
}

/// `formals[k]` is the input bound to the k-th actual.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mapping {
    pub formals: Vec<Ident>,
}

impl Mapping {
    pub fn formal_of(&self, actual: usize) -> &Ident {
        &self.formals[actual]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("{module} takes {expected} caller inputs, the call passes {found}")]
    ArityMismatch {
        module: Ident,
        expected: usize,
        found: usize,
    },
    #[error("actual name {0} is given twice")]
    DuplicateName(Ident),
    #[error("cannot tell which inputs of {module} receive actuals {actuals:?}")]
    AmbiguousMapping { module: Ident, actuals: Vec<usize> },
    #[error("no input of {module} can receive actual {actual}: {reason}")]
    Unresolvable {
        module: Ident,
        actual: usize,
        reason: String,
    },
    #[error("no module named {0}")]
    UnknownModule(Ident),
}

impl ResolveError {
    pub fn kind(&self) -> &'static str {
        match self {
            ResolveError::ArityMismatch { .. } => "arity-mismatch",
            ResolveError::DuplicateName(_) => "duplicate-name",
            ResolveError::AmbiguousMapping { .. } => "ambiguous-mapping",
            ResolveError::Unresolvable { .. } => "unresolvable",
            ResolveError::UnknownModule(_) => "unknown-module",
        }
    }
}

pub fn resolve_call(call: &CallSignature, callee: &ModuleDef) -> Result<Mapping, ResolveError> {
    let formals: Vec<(&Ident, &PatchType)> = callee.caller_inputs().map(|d| (&d.name, &d.ty)).collect();
    let actuals = &call.actuals;
    let module = callee.name.clone();
    if formals.len() != actuals.len() {
        return Err(ResolveError::ArityMismatch {
            module,
            expected: formals.len(),
            found: actuals.len(),
        });
    }
    for (i, a) in actuals.iter().enumerate() {
        if let Some(n) = &a.name {
            if actuals[..i].iter().any(|b| b.name.as_ref() == Some(n)) {
                return Err(ResolveError::DuplicateName(n.clone()));
            }
        }
    }

    let n = actuals.len();
    let mut bound: Vec<Option<usize>> = vec![None; n];
    let mut taken = vec![false; n];

    for (i, a) in actuals.iter().enumerate() {
        let Some(name) = &a.name else { continue };
        if let Some(f) = formals.iter().position(|(fname, _)| *fname == name) {
            if !compatible(&a.ty, formals[f].1) {
                return Err(ResolveError::Unresolvable {
                    module,
                    actual: i + 1,
                    reason: format!("{name} expects {}, got {}", formals[f].1, a.ty),
                });
            }
            bound[i] = Some(f);
            taken[f] = true;
        }
    }

    let fits = |a: usize, f: usize| compatible(&actuals[a].ty, formals[f].1);
    loop {
        let mut progress = false;
        for a in 0..n {
            if bound[a].is_some() {
                continue;
            }
            let cands: Vec<usize> = (0..n).filter(|&f| !taken[f] && fits(a, f)).collect();
            match cands.as_slice() {
                [] => {
                    return Err(ResolveError::Unresolvable {
                        module,
                        actual: a + 1,
                        reason: format!("no free input accepts {}", actuals[a].ty),
                    })
                }
                [f] => {
                    bound[a] = Some(*f);
                    taken[*f] = true;
                    progress = true;
                }
                _ => {}
            }
        }
        for f in 0..n {
            if taken[f] {
                continue;
            }
            let cands: Vec<usize> = (0..n).filter(|&a| bound[a].is_none() && fits(a, f)).collect();
            match cands.as_slice() {
                [] => {
                    let actual = (0..n).find(|&a| bound[a].is_none()).map_or(0, |a| a + 1);
                    return Err(ResolveError::Unresolvable {
                        module,
                        actual,
                        reason: format!("nothing is left for input {}", formals[f].0),
                    });
                }
                [a] => {
                    bound[*a] = Some(f);
                    taken[f] = true;
                    progress = true;
                }
                _ => {}
            }
        }
        if !progress {
            break;
        }
    }

    let open: Vec<usize> = (0..n).filter(|&a| bound[a].is_none()).collect();
    if open.is_empty() {
        return Ok(Mapping {
            formals: bound
                .into_iter()
                .map(|f| formals[f.expect("all bound")].0.clone())
                .collect(),
        });
    }
    let free: Vec<usize> = (0..n).filter(|&f| !taken[f]).collect();
    if has_perfect_matching(&open, &free, &fits) {
        Err(ResolveError::AmbiguousMapping {
            module,
            actuals: open.iter().map(|a| a + 1).collect(),
        })
    } else {
        Err(ResolveError::Unresolvable {
            module,
            actual: open[0] + 1,
            reason: "the remaining actuals cannot all be placed".into(),
        })
    }
}

/// Kuhn's augmenting-path matching between `left` and `right`.
fn has_perfect_matching(left: &[usize], right: &[usize], fits: &dyn Fn(usize, usize) -> bool) -> bool {
    fn augment(
        a: usize,
        right: &[usize],
        fits: &dyn Fn(usize, usize) -> bool,
        owner: &mut [Option<usize>],
        seen: &mut [bool],
    ) -> bool {
        for (k, &f) in right.iter().enumerate() {
            if seen[k] || !fits(a, f) {
                continue;
            }
            seen[k] = true;
            if owner[k].is_none_or(|b| augment(b, right, fits, owner, seen)) {
                owner[k] = Some(a);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; right.len()];
    left.iter().all(|&a| {
        let mut seen = vec![false; right.len()];
        augment(a, right, fits, &mut owner, &mut seen)
    })
}

pub fn resolve_module<'p>(
    name: &Ident,
    call: &CallSignature,
    program: &'p PatchProgram,
) -> Result<(&'p ModuleDef, Mapping), ResolveError> {
    let m = program
        .module(name)
        .ok_or_else(|| ResolveError::UnknownModule(name.clone()))?;
    Ok((m, resolve_call(call, m)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_module, DataObjectDecl};

    fn callee(formals: &[(&str, PatchType)]) -> ModuleDef {
        build_module(
            "Callee",
            formals
                .iter()
                .map(|(n, t)| DataObjectDecl::caller(n, t.clone()))
                .collect(),
            vec![],
            vec![],
        )
    }

    fn names(m: &Mapping) -> Vec<&str> {
        m.formals.iter().map(|f| f.as_str()).collect()
    }

    #[test]
    fn by_name_in_any_order() {
        let c = callee(&[("city", PatchType::String), ("zip", PatchType::Integer)]);
        let call = CallSignature {
            actuals: vec![
                ActualSig::named("zip", PatchType::Integer),
                ActualSig::named("city", PatchType::String),
            ],
        };
        assert_eq!(names(&resolve_call(&call, &c).unwrap()), ["zip", "city"]);
    }

    #[test]
    fn by_unique_type() {
        let c = callee(&[("count", PatchType::Integer), ("label", PatchType::String)]);
        let call = CallSignature {
            actuals: vec![
                ActualSig::unnamed(PatchType::String),
                ActualSig::unnamed(PatchType::Integer),
            ],
        };
        assert_eq!(names(&resolve_call(&call, &c).unwrap()), ["label", "count"]);
    }

    #[test]
    fn indistinguishable_is_ambiguous() {
        let c = callee(&[("lo", PatchType::Integer), ("hi", PatchType::Integer)]);
        let call = CallSignature {
            actuals: vec![
                ActualSig::unnamed(PatchType::Integer),
                ActualSig::unnamed(PatchType::Integer),
            ],
        };
        assert_eq!(resolve_call(&call, &c).unwrap_err().kind(), "ambiguous-mapping");
    }

    #[test]
    fn naming_one_settles_the_other() {
        let c = callee(&[("lo", PatchType::Integer), ("hi", PatchType::Integer)]);
        let call = CallSignature {
            actuals: vec![
                ActualSig::unnamed(PatchType::Integer),
                ActualSig::named("LO", PatchType::Integer),
            ],
        };
        assert_eq!(names(&resolve_call(&call, &c).unwrap()), ["hi", "lo"]);
    }

    #[test]
    fn errors() {
        let c = callee(&[("a", PatchType::Integer)]);
        let two = CallSignature {
            actuals: vec![ActualSig::unnamed(PatchType::Integer); 2],
        };
        assert_eq!(resolve_call(&two, &c).unwrap_err().kind(), "arity-mismatch");
        let wrong = CallSignature {
            actuals: vec![ActualSig::unnamed(PatchType::String)],
        };
        assert_eq!(resolve_call(&wrong, &c).unwrap_err().kind(), "unresolvable");
        let named_wrong = CallSignature {
            actuals: vec![ActualSig::named("a", PatchType::Boolean)],
        };
        assert_eq!(resolve_call(&named_wrong, &c).unwrap_err().kind(), "unresolvable");
    }

    #[test]
    fn numeric_compatibility_counts() {
        let c = callee(&[("x", PatchType::Real), ("s", PatchType::String)]);
        let call = CallSignature {
            actuals: vec![
                ActualSig::unnamed(PatchType::Integer),
                ActualSig::unnamed(PatchType::String),
            ],
        };
        assert_eq!(names(&resolve_call(&call, &c).unwrap()), ["x", "s"]);
    }

    #[test]
    fn module_lookup_is_case_insensitive() {
        let p = PatchProgram {
            modules: vec![build_module("BubbleSort", vec![], vec![], vec![])],
            entry: Ident::new("bubblesort").unwrap(),
        };
        let call = CallSignature::default();
        assert!(resolve_module(&Ident::new("bubblesort").unwrap(), &call, &p).is_ok());
        assert_eq!(
            resolve_module(&Ident::new("quicksort").unwrap(), &call, &p)
                .unwrap_err()
                .kind(),
            "unknown-module"
        );
    }
}
