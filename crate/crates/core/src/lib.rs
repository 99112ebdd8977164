//! Core of the Patch toolchain: program model, evaluator, tracing,
//! module resolution, code generation and the document format.

pub mod codegen;
pub mod expr;
pub mod fuzz;
pub mod ident;
pub mod literal;
pub mod model;
pub mod interp;
pub mod ops;
pub mod reference;
pub mod stream;
pub mod resolver;
pub mod serial;
pub mod trace;
pub mod typeck;
pub mod types;
pub mod validate;
pub mod value;
