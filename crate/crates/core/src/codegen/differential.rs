//! Runs emitted harnesses on the host toolchain and compares them with the
//! interpreter.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use thiserror::Error;

use super::{Dialect, ScratchLayout, SourceText};
use crate::ident::Ident;
use crate::interp::{run_module, ArgValue, RunConfig};
use crate::literal::{read_untyped, render_value};
use crate::model::PatchProgram;
use crate::value::Value;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("toolchain missing: {0}")]
    ToolchainMissing(String),
    #[error("build failed: {0}")]
    BuildFailed(String),
    #[error("timed out after {0:?}")]
    Timeout(Duration),
    #[error("harness output malformed: {0}")]
    Protocol(String),
    #[error("input set {0} is missing value for {1}")]
    MissingInput(usize, Ident),
    #[error(transparent)]
    Codegen(#[from] super::CodegenError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RunnerError {
    pub fn kind(&self) -> &'static str {
        match self {
            RunnerError::ToolchainMissing(_) => "toolchain-missing",
            RunnerError::BuildFailed(_) => "build-failed",
            RunnerError::Timeout(_) => "timeout",
            RunnerError::Protocol(_) => "protocol-error",
            RunnerError::MissingInput(..) => "missing-input",
            RunnerError::Codegen(e) => e.kind(),
            RunnerError::Io(_) => "io-error",
        }
    }
}

/// One harness invocation: which bundled program and its input lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HarnessRun {
    pub program: usize,
    pub lines: Vec<String>,
}

/// What a run printed, or what the interpreter produced, in text form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observed {
    pub displayed: Vec<String>,
    pub result: Result<Vec<(String, String)>, String>,
}

static RUN_IDS: AtomicU64 = AtomicU64::new(0);

/// Builds and runs emitted sources under `<work>/<run-id>/{src,bin,out}`.
#[derive(Debug, Clone)]
pub struct ExternalRunner {
    pub work: PathBuf,
    pub build_timeout: Duration,
    pub run_timeout: Duration,
    /// Remove the scratch directory after a successful run.
    pub cleanup: bool,
}

impl Default for ExternalRunner {
    fn default() -> Self {
        let work = std::env::var_os("PATCH_WORKDIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| std::env::temp_dir().join("patch-work"));
        ExternalRunner::new(work)
    }
}

impl ExternalRunner {
    pub fn new(work: impl Into<PathBuf>) -> Self {
        ExternalRunner {
            work: work.into(),
            build_timeout: Duration::from_secs(120),
            run_timeout: Duration::from_secs(120),
            cleanup: true,
        }
    }

    /// True when every tool the dialect needs answers `--version`.
    pub fn available(&self, d: &dyn Dialect) -> bool {
        d.tools().iter().all(|t| {
            Command::new(t)
                .arg("--version")
                .stdout(Stdio::null())
                .stderr(Stdio::null())
                .status()
                .map(|s| s.success())
                .unwrap_or(false)
        })
    }

    fn layout(&self) -> std::io::Result<(PathBuf, ScratchLayout)> {
        let id = format!(
            "run-{}-{}",
            std::process::id(),
            RUN_IDS.fetch_add(1, Ordering::Relaxed)
        );
        let root = self.work.join(id);
        let layout = ScratchLayout {
            src: root.join("src"),
            bin: root.join("bin"),
            out: root.join("out"),
        };
        for dir in [&layout.src, &layout.bin, &layout.out] {
            std::fs::create_dir_all(dir)?;
        }
        Ok((root, layout))
    }

    /// Writes, builds and runs `source` once, feeding all `runs` on stdin.
    pub fn execute(&self, d: &dyn Dialect, source: &SourceText, runs: &[HarnessRun]) -> Result<Vec<Observed>, RunnerError> {
        if !self.available(d) {
            return Err(RunnerError::ToolchainMissing(d.tools().join(", ")));
        }
        let (root, layout) = self.layout()?;
        std::fs::write(layout.src.join(&source.file_name), source.full())?;
        std::fs::write(layout.src.join(source.runtime.name), source.runtime.text)?;
        if let Some(mut build) = d.build(&layout) {
            let (status, _, err) = run_with_timeout(&mut build, b"", self.build_timeout)?;
            if !status {
                return Err(RunnerError::BuildFailed(err));
            }
        }
        let mut stdin = String::new();
        for r in runs {
            stdin.push_str(&format!("#run {} {}\n", r.program, r.lines.len()));
            for l in &r.lines {
                stdin.push_str(l);
                stdin.push('\n');
            }
        }
        let mut run = d.run(&layout);
        let (status, out, err) = run_with_timeout(&mut run, stdin.as_bytes(), self.run_timeout)?;
        std::fs::write(layout.out.join("stdout.txt"), &out)?;
        if !status {
            return Err(RunnerError::Protocol(format!("harness exited abnormally: {err}")));
        }
        let observed = parse_harness_output(&out)?;
        if observed.len() != runs.len() {
            return Err(RunnerError::Protocol(format!(
                "expected {} runs, got {}",
                runs.len(),
                observed.len()
            )));
        }
        if self.cleanup {
            let _ = std::fs::remove_dir_all(&root);
        }
        Ok(observed)
    }
}

fn run_with_timeout(cmd: &mut Command, input: &[u8], limit: Duration) -> Result<(bool, String, String), RunnerError> {
    let mut child = cmd
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let input = input.to_vec();
    let writer = std::thread::spawn(move || {
        let _ = stdin.write_all(&input);
    });
    let mut stdout = child.stdout.take().expect("piped stdout");
    let mut stderr = child.stderr.take().expect("piped stderr");
    let out_reader = std::thread::spawn(move || {
        let mut s = Vec::new();
        let _ = stdout.read_to_end(&mut s);
        s
    });
    let err_reader = std::thread::spawn(move || {
        let mut s = Vec::new();
        let _ = stderr.read_to_end(&mut s);
        s
    });
    let start = Instant::now();
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if start.elapsed() > limit {
            let _ = child.kill();
            let _ = child.wait();
            return Err(RunnerError::Timeout(limit));
        }
        std::thread::sleep(Duration::from_millis(5));
    };
    let _ = writer.join();
    let out = out_reader.join().unwrap_or_default();
    let err = err_reader.join().unwrap_or_default();
    Ok((
        status.success(),
        String::from_utf8_lossy(&out).into_owned(),
        String::from_utf8_lossy(&err).into_owned(),
    ))
}

/// Displayed lines, outputs, and error kind of a run being parsed.
type Partial = (Vec<String>, Vec<(String, String)>, Option<String>);

/// Splits harness stdout into per-run observations.
pub fn parse_harness_output(text: &str) -> Result<Vec<Observed>, RunnerError> {
    let mut runs = Vec::new();
    let mut current: Option<Partial> = None;
    for line in text.lines() {
        if line == "#run" {
            current = Some((Vec::new(), Vec::new(), None));
            continue;
        }
        let Some((displayed, outputs, error)) = current.as_mut() else {
            return Err(RunnerError::Protocol(format!("text outside a run: {line}")));
        };
        if line == "#end" {
            let (displayed, outputs, error) = current.take().expect("checked above");
            runs.push(Observed {
                displayed,
                result: match error {
                    Some(kind) => Err(kind),
                    None => Ok(outputs),
                },
            });
        } else if let Some(v) = line.strip_prefix("display ") {
            displayed.push(v.to_string());
        } else if let Some(rest) = line.strip_prefix("output ") {
            let (name, v) = rest
                .split_once(' ')
                .ok_or_else(|| RunnerError::Protocol(format!("bad output line: {line}")))?;
            outputs.push((name.to_string(), v.to_string()));
        } else if let Some(kind) = line.strip_prefix("error ") {
            *error = Some(kind.to_string());
        } else {
            return Err(RunnerError::Protocol(format!("unexpected line: {line}")));
        }
    }
    if current.is_some() {
        return Err(RunnerError::Protocol("unterminated run".into()));
    }
    Ok(runs)
}

/// Named caller inputs plus console lines for one check.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InputSet {
    pub values: Vec<(Ident, Value)>,
    pub console: Vec<String>,
}

impl InputSet {
    pub fn new(values: Vec<(Ident, Value)>) -> Self {
        InputSet {
            values,
            console: Vec::new(),
        }
    }
}

/// Interpreter run of the entry module, in harness text form.
pub fn interpret(program: &PatchProgram, input: &InputSet) -> Observed {
    let args = input
        .values
        .iter()
        .map(|(n, v)| ArgValue::named(n.as_str(), v.clone()))
        .collect();
    let exec = run_module(program, &program.entry, args, input.console.clone(), RunConfig::default());
    Observed {
        displayed: exec.displayed.iter().map(render_value).collect(),
        result: exec
            .result
            .map(|r| r.outputs.iter().map(|(n, v)| (n.to_string(), render_value(v))).collect())
            .map_err(|e| e.kind.to_string()),
    }
}

/// Harness lines for `input`: caller inputs in declared order, then console.
pub fn harness_lines(program: &PatchProgram, input: &InputSet, index: usize) -> Result<Vec<String>, RunnerError> {
    let entry = super::entry_of(program)?;
    let mut lines = Vec::new();
    for d in entry.caller_inputs() {
        let (_, v) = input
            .values
            .iter()
            .find(|(n, _)| n == &d.name)
            .ok_or_else(|| RunnerError::MissingInput(index, d.name.clone()))?;
        lines.push(render_value(v));
    }
    lines.extend(input.console.iter().cloned());
    Ok(lines)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub program: usize,
    pub input: usize,
    pub agree: bool,
    pub interpreter: Observed,
    pub emitted: Observed,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EquivalenceReport {
    pub dialect: String,
    pub verdicts: Vec<Verdict>,
}

impl EquivalenceReport {
    pub fn all_agree(&self) -> bool {
        self.verdicts.iter().all(|v| v.agree)
    }

    pub fn divergences(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.agree)
    }
}

/// Compares the interpreter and the emitted program of `program` on every
/// input set.
pub fn differential_check(
    program: &PatchProgram,
    dialect_id: &str,
    inputs: &[InputSet],
    runner: &ExternalRunner,
) -> Result<EquivalenceReport, RunnerError> {
    differential_check_many(&[(program, inputs)], dialect_id, runner)
}

/// Like [`differential_check`] for several programs sharing one build.
pub fn differential_check_many(
    cases: &[(&PatchProgram, &[InputSet])],
    dialect_id: &str,
    runner: &ExternalRunner,
) -> Result<EquivalenceReport, RunnerError> {
    let d = super::dialect(dialect_id)?;
    let mut report = EquivalenceReport {
        dialect: dialect_id.to_string(),
        verdicts: Vec::new(),
    };
    if cases.iter().all(|(_, inputs)| inputs.is_empty()) {
        return Ok(report);
    }
    let programs: Vec<&PatchProgram> = cases.iter().map(|(p, _)| *p).collect();
    let source = super::emit_bundle(&programs, dialect_id)?;
    let mut runs = Vec::new();
    let mut expected = Vec::new();
    for (k, (program, inputs)) in cases.iter().enumerate() {
        for (i, input) in inputs.iter().enumerate() {
            runs.push(HarnessRun {
                program: k,
                lines: harness_lines(program, input, i)?,
            });
            expected.push((k, i, interpret(program, input)));
        }
    }
    let observed = runner.execute(d, &source, &runs)?;
    for ((program, input, interpreter), emitted) in expected.into_iter().zip(observed) {
        report.verdicts.push(Verdict {
            program,
            input,
            agree: observations_agree(&interpreter, &emitted),
            interpreter,
            emitted,
        });
    }
    Ok(report)
}

pub const REAL_TOLERANCE: f64 = 1e-9;

pub fn observations_agree(a: &Observed, b: &Observed) -> bool {
    let lists = |x: &[String], y: &[String]| x.len() == y.len() && x.iter().zip(y).all(|(p, q)| texts_agree(p, q));
    if !lists(&a.displayed, &b.displayed) {
        return false;
    }
    match (&a.result, &b.result) {
        (Ok(x), Ok(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|((n, p), (m, q))| n == m && texts_agree(p, q))
        }
        (Err(x), Err(y)) => x == y,
        _ => false,
    }
}

/// Exact text match, or equal values with reals within the tolerance.
pub fn texts_agree(a: &str, b: &str) -> bool {
    if a == b {
        return true;
    }
    match (read_untyped(a), read_untyped(b)) {
        (Ok(x), Ok(y)) => values_close(&x, &y),
        _ => false,
    }
}

fn values_close(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Real(x), Value::Real(y)) => reals_close(*x, *y),
        (Value::List(xs), Value::List(ys)) | (Value::Set(xs), Value::Set(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| values_close(x, y))
        }
        (Value::Tuple(xs), Value::Tuple(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|((n, x), (m, y))| n == m && values_close(x, y))
        }
        _ => a == b,
    }
}

pub fn reals_close(x: f64, y: f64) -> bool {
    if x == y || (x.is_nan() && y.is_nan()) {
        return true;
    }
    let scale = x.abs().max(y.abs());
    (x - y).abs() <= REAL_TOLERANCE * scale
}

/// Scratch root used by tests and the command line when nothing is set.
pub fn default_work_dir() -> PathBuf {
    ExternalRunner::default().work
}
