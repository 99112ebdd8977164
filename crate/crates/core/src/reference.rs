//! The bubble-sort program used throughout the docs and tests.

use crate::expr::{parse_expr, parse_place};
use crate::ident::Ident;
use crate::model::{build_module, AssignForm, DataObjectDecl, ModuleDef, Payload, PatchProgram, Tree};
use crate::types::PatchType;

fn e(src: &str) -> crate::expr::Expr {
    parse_expr(src).expect("reference expression parses")
}

fn p(src: &str) -> crate::expr::Place {
    parse_place(src).expect("reference place parses")
}

/// Eight steps: set up the flag, repeat passes until no swap happens, stop.
pub fn bubble_sort_module() -> ModuleDef {
    let list = PatchType::list(PatchType::Integer);
    build_module(
        "BubbleSort",
        vec![DataObjectDecl::caller("list", list.clone())],
        vec![DataObjectDecl::caller("list", list)],
        vec![
            Tree::leaf(Payload::Transform {
                target: p("sorted"),
                expr: e("LEN list < 2"),
            }),
            Tree::with_body(
                Payload::ConditionalLoop { cond: e("NOT sorted") },
                vec![
                    Tree::leaf(Payload::Assign(AssignForm::Copy {
                        target: p("sorted"),
                        source: e("TRUE"),
                    })),
                    Tree::with_body(
                        Payload::CounterLoop {
                            var: Ident::new("i").expect("valid identifier"),
                            start: e("1"),
                            end: e("LEN list - 1"),
                        },
                        vec![Tree::with_body(
                            Payload::ByPass {
                                cond: e("list[i] > list[i + 1]"),
                            },
                            vec![
                                Tree::leaf(Payload::Assign(AssignForm::Exchange {
                                    left: p("list[i]"),
                                    right: p("list[i + 1]"),
                                })),
                                Tree::leaf(Payload::Assign(AssignForm::Copy {
                                    target: p("sorted"),
                                    source: e("FALSE"),
                                })),
                            ],
                        )],
                    ),
                ],
            ),
            Tree::leaf(Payload::Stop),
        ],
    )
}

pub fn bubble_sort_program() -> PatchProgram {
    let m = bubble_sort_module();
    PatchProgram {
        entry: m.name.clone(),
        modules: vec![m],
    }
}
