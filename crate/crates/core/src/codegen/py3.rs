//! Python 3 target.

use std::process::Command;

use super::lower::{function_name, Lang, Lowering};
use super::{
    entry_of, prefix, BlockStyle, CodegenError, Dialect, DialectTraits, IntDivision, RuntimeFile, ScratchLayout,
    SourceText,
};
use crate::model::PatchProgram;

pub(crate) struct Py3;

const RUNTIME: RuntimeFile = RuntimeFile {
    name: "patch_runtime.py",
    text: include_str!("runtime/patch_runtime.py"),
};

impl Dialect for Py3 {
    fn id(&self) -> &'static str {
        "py3"
    }

    fn traits(&self) -> DialectTraits {
        DialectTraits {
            blocks: BlockStyle::Indentation,
            index_base: 0,
            division: IntDivision::Widening,
        }
    }

    fn file_name(&self) -> &'static str {
        "main.py"
    }

    fn runtime(&self) -> RuntimeFile {
        RUNTIME
    }

    fn emit_bundle(&self, programs: &[&PatchProgram]) -> Result<SourceText, CodegenError> {
        let bundle = programs.len() != 1;
        let mut text = String::from("import patch_runtime as P\n");
        let mut entries = Vec::new();
        let mut entry_symbol = String::new();
        for (k, program) in programs.iter().enumerate() {
            let pre = prefix(bundle, k);
            let entry = entry_of(program)?;
            let mut low = Lowering::new(Lang::Py, program, &pre);
            for m in &program.modules {
                low.blank();
                low.blank();
                low.module(m)?;
            }
            text.push_str(&low.finish());
            let symbol = function_name(&pre, &entry.name);
            let low = Lowering::new(Lang::Py, program, &pre);
            let types: Vec<String> = entry.caller_inputs().map(|d| low.type_descriptor(&d.ty)).collect();
            let outputs: Vec<String> = entry.outputs.iter().map(|d| format!("\"{}\"", d.name)).collect();
            entries.push(format!(
                "        ({symbol}, [{}], [{}]),\n",
                types.join(", "),
                outputs.join(", ")
            ));
            if k == 0 {
                entry_symbol = symbol;
            }
        }
        let mut harness = String::from("\nif __name__ == \"__main__\":\n    P.serve([\n");
        for e in entries {
            harness.push_str(&e);
        }
        harness.push_str("    ])\n");
        Ok(SourceText {
            dialect: self.id().to_string(),
            file_name: self.file_name().to_string(),
            text,
            entry_symbol,
            harness,
            runtime: RUNTIME,
        })
    }

    fn tools(&self) -> &'static [&'static str] {
        &["python3"]
    }

    fn build(&self, _layout: &ScratchLayout) -> Option<Command> {
        None
    }

    fn run(&self, layout: &ScratchLayout) -> Command {
        let mut cmd = Command::new("python3");
        cmd.arg("-B").arg(layout.src.join(self.file_name()));
        cmd
    }
}
