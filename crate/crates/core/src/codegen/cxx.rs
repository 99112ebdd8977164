//! C++20 target.

use std::process::Command;

use super::lower::{function_name, Lang, Lowering};
use super::{
    entry_of, path_arg, prefix, BlockStyle, CodegenError, Dialect, DialectTraits, IntDivision, RuntimeFile,
    ScratchLayout, SourceText,
};
use crate::model::PatchProgram;

pub(crate) struct Cxx;

const RUNTIME: RuntimeFile = RuntimeFile {
    name: "patch_runtime.hpp",
    text: include_str!("runtime/patch_runtime.hpp"),
};

impl Dialect for Cxx {
    fn id(&self) -> &'static str {
        "cxx"
    }

    fn traits(&self) -> DialectTraits {
        DialectTraits {
            blocks: BlockStyle::Braces,
            index_base: 0,
            division: IntDivision::Truncating,
        }
    }

    fn file_name(&self) -> &'static str {
        "main.cpp"
    }

    fn runtime(&self) -> RuntimeFile {
        RUNTIME
    }

    fn emit_bundle(&self, programs: &[&PatchProgram]) -> Result<SourceText, CodegenError> {
        let bundle = programs.len() != 1;
        let mut text = String::from("#include \"patch_runtime.hpp\"\n");
        let mut entries = Vec::new();
        let mut entry_symbol = String::new();
        for (k, program) in programs.iter().enumerate() {
            let pre = prefix(bundle, k);
            let entry = entry_of(program)?;
            let mut low = Lowering::new(Lang::Cxx, program, &pre);
            text.push('\n');
            for m in &program.modules {
                low.forward_declaration(m);
            }
            for m in &program.modules {
                low.blank();
                low.module(m)?;
            }
            text.push_str(&low.finish());
            let symbol = function_name(&pre, &entry.name);
            let args: Vec<String> = (0..entry.caller_inputs().count()).map(|i| format!("a[{i}]")).collect();
            let call = std::iter::once("ctx".to_string())
                .chain(std::iter::once("depth".to_string()))
                .chain(args)
                .collect::<Vec<_>>()
                .join(", ");
            let low = Lowering::new(Lang::Cxx, program, &pre);
            let types: Vec<String> = entry.caller_inputs().map(|d| low.type_descriptor(&d.ty)).collect();
            let outputs: Vec<String> = entry.outputs.iter().map(|d| format!("\"{}\"", d.name)).collect();
            entries.push(format!(
                "        patch::Program{{[](patch::Ctx& ctx, int depth, std::vector<patch::Value>& a) {{ return {symbol}({call}); }},\n                       {{{}}},\n                       {{{}}}}},\n",
                types.join(", "),
                outputs.join(", ")
            ));
            if k == 0 {
                entry_symbol = symbol;
            }
        }
        let mut harness = String::from("int main() {\n    return patch::serve({\n");
        for e in entries {
            harness.push_str(&e);
        }
        harness.push_str("    });\n}\n");
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
        &["g++"]
    }

    fn build(&self, layout: &ScratchLayout) -> Option<Command> {
        let mut cmd = Command::new("g++");
        cmd.args(["-std=c++20", "-O0", "-w", "-I"])
            .arg(path_arg(&layout.src))
            .arg("-o")
            .arg(layout.bin.join("main"))
            .arg(layout.src.join(self.file_name()));
        Some(cmd)
    }

    fn run(&self, layout: &ScratchLayout) -> Command {
        Command::new(layout.bin.join("main"))
    }
}
