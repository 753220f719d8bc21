use std::fmt::Write as _;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::Duration;

use super::exec::{run_with_limits, RunOutcome};
use super::extract::CandidateFunction;
use super::InputBank;

/// Why a compiled harness failed to produce usable outputs.
#[derive(Clone, Debug, PartialEq)]
pub enum ExecFailure {
    CompileError(String),
    RuntimeCrash(String),
    Timeout,
    OutputCap,
    BadOutput(String),
}

impl ExecFailure {
    pub fn label(&self) -> &'static str {
        match self {
            ExecFailure::CompileError(_) => "compile-error",
            ExecFailure::RuntimeCrash(_) => "runtime-crash",
            ExecFailure::Timeout => "timeout",
            ExecFailure::OutputCap => "output-cap",
            ExecFailure::BadOutput(_) => "bad-output",
        }
    }

    pub fn detail(&self) -> String {
        match self {
            ExecFailure::CompileError(s) | ExecFailure::RuntimeCrash(s) | ExecFailure::BadOutput(s) => s.clone(),
            ExecFailure::Timeout => "exceeded wall-clock budget".into(),
            ExecFailure::OutputCap => "output exceeded cap".into(),
        }
    }
}

/// C program embedding `bank` rows truncated to the function's arity and
/// printing each result with `%.17g`. `argv[1]` sets how many passes over
/// the bank to make.
pub fn harness_source(f: &CandidateFunction, bank: &InputBank) -> String {
    let arity = f.arity();
    let mut s = String::new();
    s.push_str("#include <stdlib.h>\n#include <stdio.h>\n#include <math.h>\n\n");
    let _ = writeln!(s, "static const double nsc_inputs[{}][{}] = {{", bank.rows(), arity.max(1));
    for r in 0..bank.rows() {
        let row = &bank.row(r)[..arity];
        let vals: Vec<String> = if arity == 0 {
            vec!["0.0".into()]
        } else {
            row.iter().map(|v| format!("{v:?}")).collect()
        };
        let _ = writeln!(s, "  {{{}}},", vals.join(", "));
    }
    s.push_str("};\n\n");
    s.push_str(&f.source);
    s.push_str("\n\nint main(int argc, char **argv) {\n");
    s.push_str("    int nsc_passes = argc > 1 ? atoi(argv[1]) : 1;\n");
    s.push_str("    for (int nsc_p = 0; nsc_p < nsc_passes; nsc_p++) {\n");
    let _ = writeln!(s, "        for (int nsc_i = 0; nsc_i < {}; nsc_i++) {{", bank.rows());
    let args: Vec<String> = f
        .params
        .iter()
        .enumerate()
        .map(|(j, p)| format!("({})nsc_inputs[nsc_i][{j}]", p.ty))
        .collect();
    let _ = writeln!(s, "            {} nsc_out = {}({});", f.return_type, f.name, args.join(", "));
    s.push_str("            printf(\"%.17g\\n\", (double)nsc_out);\n");
    s.push_str("        }\n    }\n    return 0;\n}\n");
    s
}

/// A compiled harness in a private temporary directory.
pub struct Compiled {
    dir: tempfile::TempDir,
    rows: usize,
}

pub fn compile(f: &CandidateFunction, bank: &InputBank, compiler: &str, timeout: Duration) -> Result<Compiled, ExecFailure> {
    let dir = tempfile::tempdir().map_err(|e| ExecFailure::CompileError(format!("temporary directory: {e}")))?;
    let src = dir.path().join("harness.c");
    std::fs::write(&src, harness_source(f, bank)).map_err(|e| ExecFailure::CompileError(e.to_string()))?;
    let exe = dir.path().join("harness");
    let mut cmd = Command::new(compiler);
    cmd.args(["-O0", "-ffp-contract=off", "-w", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-lm")
        .stdin(Stdio::null());
    match run_with_limits(cmd, timeout, 1 << 20, |_| {}) {
        Ok(RunOutcome::Exited { status: 0, .. }) => Ok(Compiled { dir, rows: bank.rows() }),
        Ok(RunOutcome::Exited { stderr, .. }) | Ok(RunOutcome::Signaled { stderr }) => {
            let msg = String::from_utf8_lossy(&stderr);
            let first = msg.lines().find(|l| l.contains("error")).unwrap_or_else(|| msg.lines().next().unwrap_or(""));
            Err(ExecFailure::CompileError(first.chars().take(200).collect()))
        }
        Ok(RunOutcome::TimedOut) => Err(ExecFailure::Timeout),
        Ok(RunOutcome::OutputCapped) => Err(ExecFailure::CompileError("compiler output exceeded cap".into())),
        Err(e) => Err(ExecFailure::CompileError(format!("could not run {compiler}: {e}"))),
    }
}

fn parse_output(text: &[u8], expected: usize) -> Result<Vec<f64>, ExecFailure> {
    let text = std::str::from_utf8(text).map_err(|_| ExecFailure::BadOutput("non-UTF-8 output".into()))?;
    let vals: Vec<f64> = text
        .lines()
        .map(|l| {
            let t = l.trim();
            if t.to_ascii_lowercase().contains("nan") {
                Ok(f64::NAN)
            } else {
                t.parse::<f64>().map_err(|_| ExecFailure::BadOutput(format!("unparseable output line {t:?}")))
            }
        })
        .collect::<Result<_, _>>()?;
    if vals.len() != expected {
        return Err(ExecFailure::BadOutput(format!("expected {expected} outputs, got {}", vals.len())));
    }
    Ok(vals)
}

impl Compiled {
    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    /// Runs `passes` sequential passes over the bank in one process.
    pub fn run(&self, passes: usize, timeout: Duration, cap: usize) -> Result<Vec<f64>, ExecFailure> {
        let mut cmd = Command::new(self.dir.path().join("harness"));
        cmd.arg(passes.to_string()).current_dir(self.dir.path()).stdin(Stdio::null()).env_clear();
        match run_with_limits(cmd, timeout, cap, |_| {}) {
            Ok(RunOutcome::Exited { status: 0, stdout, .. }) => parse_output(&stdout, self.rows * passes),
            Ok(RunOutcome::Exited { status, .. }) => Err(ExecFailure::RuntimeCrash(format!("exit status {status}"))),
            Ok(RunOutcome::Signaled { .. }) => Err(ExecFailure::RuntimeCrash("killed by signal".into())),
            Ok(RunOutcome::TimedOut) => Err(ExecFailure::Timeout),
            Ok(RunOutcome::OutputCapped) => Err(ExecFailure::OutputCap),
            Err(e) => Err(ExecFailure::RuntimeCrash(format!("could not start harness: {e}"))),
        }
    }
}
