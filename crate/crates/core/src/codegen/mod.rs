//! Source emission for target dialects.
//!
//! Every dialect ships a small runtime (value model, checked arithmetic,
//! the harness loop) next to the emitted text. Generated functions take the
//! module's caller inputs and return its outputs; the harness reads inputs
//! in canonical value syntax and prints displays and outputs the same way.

mod cxx;
pub mod differential;
mod lower;
mod py3;

use std::path::{Path, PathBuf};
use std::process::Command;

use thiserror::Error;

use crate::ident::Ident;
use crate::model::{ModuleDef, PatchProgram};
use crate::validate::validate;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodegenError {
    #[error("program is not valid: {0}")]
    InvalidProgram(String),
    #[error("no lowering for {0}")]
    Unsupported(String),
    #[error("unknown dialect {0}")]
    UnknownDialect(String),
}

impl CodegenError {
    pub fn kind(&self) -> &'static str {
        match self {
            CodegenError::InvalidProgram(_) => "invalid-program",
            CodegenError::Unsupported(_) => "unsupported-construct",
            CodegenError::UnknownDialect(_) => "unknown-dialect",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockStyle {
    Braces,
    Indentation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntDivision {
    /// `/` on two integers truncates; the lowering widens to real first.
    Truncating,
    /// `/` on two integers already yields a real.
    Widening,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DialectTraits {
    pub blocks: BlockStyle,
    /// Index of the first element of a native sequence.
    pub index_base: u8,
    pub division: IntDivision,
}

/// A support file written next to the emitted source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuntimeFile {
    pub name: &'static str,
    pub text: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceText {
    pub dialect: String,
    pub file_name: String,
    /// Module functions.
    pub text: String,
    pub entry_symbol: String,
    /// Scaffold that reads inputs, calls the entry and prints results.
    pub harness: String,
    pub runtime: RuntimeFile,
}

impl SourceText {
    /// The complete source file: functions followed by the harness.
    pub fn full(&self) -> String {
        format!("{}\n{}", self.text, self.harness)
    }
}

/// Directories of one external run.
#[derive(Debug, Clone)]
pub struct ScratchLayout {
    pub src: PathBuf,
    pub bin: PathBuf,
    pub out: PathBuf,
}

pub trait Dialect: Send + Sync {
    fn id(&self) -> &'static str;
    fn traits(&self) -> DialectTraits;
    fn file_name(&self) -> &'static str;
    fn runtime(&self) -> RuntimeFile;
    /// Emits several programs into one source; harness program `k` runs the
    /// entry module of `programs[k]`.
    fn emit_bundle(&self, programs: &[&PatchProgram]) -> Result<SourceText, CodegenError>;
    /// Executables that must be on the host to build and run.
    fn tools(&self) -> &'static [&'static str];
    fn build(&self, layout: &ScratchLayout) -> Option<Command>;
    fn run(&self, layout: &ScratchLayout) -> Command;
}

/// The registered dialects, in id order.
pub fn registry() -> Vec<&'static dyn Dialect> {
    vec![&cxx::Cxx, &py3::Py3]
}

pub fn dialect(id: &str) -> Result<&'static dyn Dialect, CodegenError> {
    registry()
        .into_iter()
        .find(|d| d.id() == id)
        .ok_or_else(|| CodegenError::UnknownDialect(id.to_string()))
}

fn check(program: &PatchProgram) -> Result<(), CodegenError> {
    let report = validate(program);
    match report.findings.first() {
        None => Ok(()),
        Some(f) => Err(CodegenError::InvalidProgram(format!(
            "{} in {} at {}: {}",
            f.rule, f.module, f.step, f.message
        ))),
    }
}

/// Emits the program with its entry module as the harness target.
pub fn emit(program: &PatchProgram, dialect_id: &str) -> Result<SourceText, CodegenError> {
    let d = dialect(dialect_id)?;
    check(program)?;
    d.emit_bundle(&[program])
}

/// Emits `module` of `program` as the entry.
pub fn emit_module(program: &PatchProgram, module: &Ident, dialect_id: &str) -> Result<SourceText, CodegenError> {
    if program.module(module).is_none() {
        return Err(CodegenError::InvalidProgram(format!("no module named {module}")));
    }
    let retargeted = PatchProgram {
        modules: program.modules.clone(),
        entry: module.clone(),
    };
    emit(&retargeted, dialect_id)
}

/// Emits many validated programs into one source so they share a single
/// build.
pub fn emit_bundle(programs: &[&PatchProgram], dialect_id: &str) -> Result<SourceText, CodegenError> {
    let d = dialect(dialect_id)?;
    for p in programs {
        check(p)?;
    }
    d.emit_bundle(programs)
}

fn entry_of(program: &PatchProgram) -> Result<&ModuleDef, CodegenError> {
    program
        .entry_module()
        .ok_or_else(|| CodegenError::InvalidProgram(format!("no entry module {}", program.entry)))
}

fn prefix(bundle: bool, k: usize) -> String {
    if bundle {
        format!("p{k}_")
    } else {
        String::new()
    }
}

pub(crate) fn path_arg(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}
