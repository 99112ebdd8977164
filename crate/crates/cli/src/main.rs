use std::fs;
use std::io::{self, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use patch_core::codegen::differential::{self, default_work_dir, ExternalRunner, Observed, RunnerError};
use patch_core::codegen::{self, CodegenError};
use patch_core::fuzz::inputs_for;
use patch_core::ident::Ident;
use patch_core::interp::{run_module, ArgValue, Execution, RunConfig};
use patch_core::literal::{read_untyped, read_value, render_value};
use patch_core::model::{ModuleDef, PatchProgram};
use patch_core::serial::{parse, PatchDocument};
use patch_core::trace::{encode_event, encode_value};
use patch_core::validate::validate;

const OK: u8 = 0;
const FINDINGS: u8 = 1;
const IO: u8 = 2;
const RUNTIME: u8 = 3;
const ENVIRONMENT: u8 = 4;

#[derive(Parser)]
#[command(name = "patch", version, about = "Check, run, trace, and translate Patch documents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Path to a .patch.json document.
    path: PathBuf,
    /// Module to run; defaults to the entry module.
    #[arg(long)]
    module: Option<String>,
    /// Input value as name=value, in canonical value syntax.
    #[arg(long = "in", value_name = "NAME=VALUE")]
    inputs: Vec<String>,
    /// A line of console input; repeat for more lines.
    #[arg(long = "console", value_name = "LINE")]
    console: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a document and report findings on standard error.
    Check { path: PathBuf },
    /// Run a module and print its outputs.
    Run {
        #[command(flatten)]
        args: RunArgs,
        /// Print a JSON object instead of plain values.
        #[arg(long)]
        json: bool,
    },
    /// Run a module and print its trace as JSON lines.
    Trace {
        #[command(flatten)]
        args: RunArgs,
    },
    /// Translate a document into a target language.
    Emit {
        path: PathBuf,
        #[arg(long)]
        dialect: String,
        /// Directory to write the source and runtime files into.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the interpreter with the translated program on random inputs.
    Diff {
        path: PathBuf,
        #[arg(long)]
        dialect: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Succeed without comparing when the toolchain is missing.
        #[arg(long)]
        allow_skip: bool,
    },
    /// Serve the editor API over HTTP.
    Serve {
        #[arg(long, default_value_t = patch_service::DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
    },
}

/// A failure reported on standard error with its exit code.
struct Failure {
    code: u8,
    line: String,
}

impl Failure {
    fn new(code: u8, kind: &str, message: impl std::fmt::Display) -> Self {
        Failure {
            code,
            line: format!("error kind={kind} msg={message}"),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::new(IO, "io-error", e)
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Check { path } => check(&path),
        Command::Run { args, json } => run(&args, json),
        Command::Trace { args } => trace(&args),
        Command::Emit { path, dialect, out } => emit(&path, &dialect, out.as_deref()),
        Command::Diff {
            path,
            dialect,
            trials,
            seed,
            allow_skip,
        } => diff(&path, &dialect, trials, seed, allow_skip),
        Command::Serve { port, bind } => serve(SocketAddr::new(bind, port)),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("{}", f.line);
            ExitCode::from(f.code)
        }
    }
}

fn load(path: &Path) -> Result<PatchDocument, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::new(IO, "io-error", format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| Failure::new(IO, e.kind(), format!("{}: {e}", path.display())))
}

/// Loads a document and fails with its findings unless it is valid.
fn load_valid(path: &Path) -> Result<PatchProgram, Failure> {
    let doc = load(path)?;
    let report = validate(&doc.program);
    if report.is_empty() {
        return Ok(doc.program);
    }
    for f in &report.findings {
        eprintln!("{f}");
    }
    Err(Failure::new(
        FINDINGS,
        "invalid-document",
        format!("{} findings", report.findings.len()),
    ))
}

fn check(path: &Path) -> Outcome {
    let doc = load(path)?;
    let report = validate(&doc.program);
    for f in &report.findings {
        eprintln!("{f}");
    }
    Ok(if report.is_empty() { OK } else { FINDINGS })
}

fn module<'p>(program: &'p PatchProgram, name: Option<&str>) -> Result<&'p ModuleDef, Failure> {
    let found = match name {
        None => program.entry_module(),
        Some(n) => Ident::new(n).ok().and_then(|n| program.module(&n)),
    };
    found.ok_or_else(|| Failure::new(RUNTIME, "unknown-module", name.unwrap_or("entry")))
}

fn arguments(m: &ModuleDef, inputs: &[String]) -> Result<Vec<ArgValue>, Failure> {
    inputs
        .iter()
        .map(|raw| {
            let (name, text) = raw
                .split_once('=')
                .ok_or_else(|| Failure::new(IO, "malformed-input", format!("expected name=value, got {raw:?}")))?;
            let name = Ident::new(name.trim()).map_err(|e| Failure::new(IO, e.kind(), e))?;
            let value = match m.input(&name) {
                Some(d) => read_value(text, &d.ty),
                None => read_untyped(text),
            }
            .map_err(|e| Failure::new(IO, e.kind(), format!("input {name}: {e}")))?;
            Ok(ArgValue {
                name: Some(name),
                value,
            })
        })
        .collect()
}

fn execute(args: &RunArgs) -> Result<Execution, Failure> {
    let program = load_valid(&args.path)?;
    let m = module(&program, args.module.as_deref())?;
    let values = arguments(m, &args.inputs)?;
    let name = m.name.clone();
    Ok(run_module(&program, &name, values, args.console.clone(), RunConfig::default()))
}

fn run(args: &RunArgs, as_json: bool) -> Outcome {
    let exec = execute(args)?;
    let mut out = io::stdout().lock();
    if as_json {
        let body = match &exec.result {
            Ok(r) => json!({
                "outputs": r.outputs.iter().map(|(n, v)| (n.to_string(), encode_value(v))).collect::<serde_json::Map<_, _>>(),
                "displayed": exec.displayed.iter().map(encode_value).collect::<Vec<_>>(),
                "stopped": r.stopped,
                "error": null,
            }),
            Err(e) => json!({
                "outputs": {},
                "displayed": exec.displayed.iter().map(encode_value).collect::<Vec<_>>(),
                "stopped": false,
                "error": { "kind": e.kind, "message": e.message, "module": e.module, "step": e.step },
            }),
        };
        writeln!(out, "{body}")?;
    } else {
        for v in &exec.displayed {
            writeln!(out, "{}", render_value(v))?;
        }
        if let Ok(r) = &exec.result {
            for (_, v) in &r.outputs {
                writeln!(out, "{}", render_value(v))?;
            }
        }
    }
    finish(&exec)
}

fn finish(exec: &Execution) -> Outcome {
    match &exec.result {
        Ok(_) => Ok(OK),
        Err(e) => Err(Failure {
            code: RUNTIME,
            line: format!(
                "error kind={} module={} step={} msg={}",
                e.kind,
                e.module,
                e.step.as_deref().unwrap_or("-"),
                e.message
            ),
        }),
    }
}

fn trace(args: &RunArgs) -> Outcome {
    let exec = execute(args)?;
    let mut out = io::stdout().lock();
    for ev in &exec.trace {
        writeln!(out, "{}", encode_event(ev))?;
    }
    finish(&exec)
}

fn codegen_failure(e: CodegenError) -> Failure {
    let code = match e {
        CodegenError::InvalidProgram(_) => FINDINGS,
        CodegenError::Unsupported(_) => RUNTIME,
        CodegenError::UnknownDialect(_) => ENVIRONMENT,
    };
    Failure::new(code, e.kind(), e)
}

fn emit(path: &Path, dialect: &str, out: Option<&Path>) -> Outcome {
    let program = load_valid(path)?;
    let src = codegen::emit(&program, dialect).map_err(codegen_failure)?;
    match out {
        None => print!("{}", src.full()),
        Some(dir) => {
            fs::create_dir_all(dir)?;
            for (name, text) in [(src.file_name.as_str(), src.full()), (src.runtime.name, src.runtime.text.to_string())] {
                let file = dir.join(name);
                fs::write(&file, text)?;
                println!("{}", file.display());
            }
        }
    }
    Ok(OK)
}

fn runner_failure(e: RunnerError) -> Failure {
    let code = match e {
        RunnerError::Codegen(CodegenError::InvalidProgram(_)) => FINDINGS,
        RunnerError::Io(_) => IO,
        _ => ENVIRONMENT,
    };
    Failure::new(code, e.kind(), e)
}

fn describe(o: &Observed) -> String {
    let result = match &o.result {
        Ok(outputs) => outputs
            .iter()
            .map(|(n, v)| format!("{n}={v}"))
            .collect::<Vec<_>>()
            .join(" "),
        Err(kind) => format!("error={kind}"),
    };
    format!("displayed=[{}] {result}", o.displayed.join(", "))
}

fn diff(path: &Path, dialect: &str, trials: usize, seed: u64, allow_skip: bool) -> Outcome {
    let program = load_valid(path)?;
    let d = codegen::dialect(dialect).map_err(codegen_failure)?;
    let runner = ExternalRunner::new(default_work_dir());
    if !runner.available(d) {
        let tools = d.tools().join(", ");
        if allow_skip {
            eprintln!("skipped kind=toolchain-missing msg=needs {tools}");
            return Ok(OK);
        }
        return Err(Failure::new(ENVIRONMENT, "toolchain-missing", format!("needs {tools}")));
    }
    let entry = program
        .entry_module()
        .ok_or_else(|| Failure::new(RUNTIME, "unknown-module", "entry"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<_> = (0..trials).map(|_| inputs_for(entry, &mut rng)).collect();
    let report = differential::differential_check(&program, dialect, &inputs, &runner).map_err(runner_failure)?;
    let mut out = io::stdout().lock();
    let mut agreed = 0;
    for v in &report.verdicts {
        if v.agree {
            agreed += 1;
            writeln!(out, "trial={} agree", v.input + 1)?;
        } else {
            writeln!(
                out,
                "trial={} diverge interpreter: {} emitted: {}",
                v.input + 1,
                describe(&v.interpreter),
                describe(&v.emitted)
            )?;
        }
    }
    writeln!(out, "agree={agreed}/{}", report.verdicts.len())?;
    Ok(if report.all_agree() { OK } else { FINDINGS })
}

fn serve(addr: SocketAddr) -> Outcome {
    tracing_subscriber::fmt().with_writer(io::stderr).init();
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::new(ENVIRONMENT, "runtime", e))?;
    rt.block_on(patch_service::serve(addr))
        .map_err(|e| Failure::new(ENVIRONMENT, "bind-failed", e))?;
    Ok(OK)
}
