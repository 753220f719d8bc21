use std::io::Write;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::Duration;

use super::exec::{run_with_limits, RunOutcome};

/// Replaces `//` and `/* */` comments with whitespace, keeping string and
/// character literals and the newlines inside block comments.
pub fn strip_comments(source: &str) -> String {
    let b = source.as_bytes();
    let mut out = String::with_capacity(source.len());
    let mut i = 0;
    let mut last = 0;
    while i < b.len() {
        match b[i] {
            b'"' | b'\'' => {
                let q = b[i];
                i += 1;
                while i < b.len() && b[i] != q && b[i] != b'\n' {
                    if b[i] == b'\\' {
                        i += 1;
                    }
                    i += 1;
                }
                i = (i + 1).min(b.len());
            }
            b'/' if i + 1 < b.len() && b[i + 1] == b'/' => {
                out.push_str(&source[last..i]);
                while i < b.len() && b[i] != b'\n' {
                    i += 1;
                }
                last = i;
            }
            b'/' if i + 1 < b.len() && b[i + 1] == b'*' => {
                out.push_str(&source[last..i]);
                out.push(' ');
                let end = source[i + 2..].find("*/").map_or(b.len(), |p| i + 2 + p + 2);
                out.extend(source[i..end].chars().filter(|&c| c == '\n'));
                i = end;
                last = i;
            }
            _ => i += 1,
        }
    }
    out.push_str(&source[last.min(source.len())..]);
    out
}

pub fn has_directives(source: &str) -> bool {
    source.lines().any(|l| l.trim_start().starts_with('#'))
}

/// Number of lines containing anything besides whitespace.
pub fn non_empty_lines(source: &str) -> usize {
    source.lines().filter(|l| !l.trim().is_empty()).count()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Preprocessed {
    pub text: String,
    pub passes: usize,
}

/// Runs `compiler -E -P` until no directive lines remain, at most
/// `max_passes` times. `include_dir` resolves quoted includes.
pub fn preprocess(
    source: &str,
    compiler: &str,
    include_dir: Option<&Path>,
    max_passes: usize,
    timeout: Duration,
) -> Result<Preprocessed, String> {
    let mut text = source.to_string();
    let mut passes = 0;
    while passes < max_passes && has_directives(&text) {
        let mut cmd = Command::new(compiler);
        cmd.args(["-E", "-P", "-x", "c"]);
        if let Some(dir) = include_dir {
            cmd.arg("-I").arg(dir);
        }
        cmd.arg("-").stdin(Stdio::piped());
        let input = text.clone();
        let outcome = run_with_limits(cmd, timeout, 64 << 20, move |mut stdin| {
            let _ = stdin.write_all(input.as_bytes());
        })
        .map_err(|e| format!("could not run preprocessor: {e}"))?;
        match outcome {
            RunOutcome::Exited { status: 0, stdout, .. } => {
                text = String::from_utf8_lossy(&stdout).into_owned();
            }
            RunOutcome::Exited { status, stderr, .. } => {
                let first = String::from_utf8_lossy(&stderr).lines().next().unwrap_or("").to_string();
                return Err(format!("preprocessor exited with {status}: {first}"));
            }
            RunOutcome::Signaled { .. } => return Err("preprocessor crashed".into()),
            RunOutcome::TimedOut => return Err("preprocessor timed out".into()),
            RunOutcome::OutputCapped => return Err("preprocessor output too large".into()),
        }
        passes += 1;
    }
    Ok(Preprocessed { text, passes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_removed_literals_kept() {
        let s = "a // x\nb /* y\nz */ c \"/* no */\" '/'";
        assert_eq!(strip_comments(s), "a \nb  \n c \"/* no */\" '/'");
    }

    #[test]
    fn counts_lines() {
        assert_eq!(non_empty_lines("a\n\n  \nb\n"), 2);
        assert!(has_directives("  #define X 1\n"));
        assert!(!has_directives("int x; // #no\n"));
    }
}
