//! Mining C functions into input/output records: preprocessing, comment
//! stripping, extraction, filtering, sandboxed execution, deduplication and
//! decontamination, plus a synthetic corpus generator.

mod exec;
mod extract;
mod filters;
mod harness;
mod pipeline;
mod record;
mod synth;
mod text;

pub use exec::{run_with_limits, RunOutcome};
pub use extract::{extract_functions, CandidateFunction, ExtractIssue, Param};
pub use filters::{contamination, filter_magnitude, filter_signature, DecontamRule};
pub use harness::{compile, harness_source, Compiled, ExecFailure};
pub use pipeline::{build_corpus, collect_sources, sources_from_strings, CorpusBuild, CorpusConfig, Rejection, SourceFile, Stage};
pub use record::{pad_dataset, ProgramRecord};
pub use synth::{synth_corpus, synth_programs, SynthFamily};
pub use text::{has_directives, non_empty_lines, preprocess, strip_comments, Preprocessed};

use std::io::{BufRead, Write};
use std::path::Path;

use thiserror::Error;

use crate::rng::Rng;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed record on line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("synthesis failed: {0}")]
    Synth(String),
    #[error("invalid corpus config: {0}")]
    Config(String),
}

/// Shared inputs for every program: `rows x width` draws from U[-1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct InputBank {
    rows: usize,
    width: usize,
    data: Vec<f64>,
}

impl InputBank {
    pub fn generate(seed: u64, rows: usize, width: usize) -> Self {
        let mut rng = Rng::derive(seed, &[0xba2c]);
        let data = (0..rows * width).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        Self { rows, width, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.width..(r + 1) * self.width]
    }
}

fn write_lines<T: serde::Serialize>(items: &[T], path: &Path) -> Result<(), CorpusError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for it in items {
        let line = serde_json::to_string(it).map_err(|e| CorpusError::Json { line: 0, source: e })?;
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_jsonl(records: &[ProgramRecord], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    write_lines(records, path.as_ref())
}

pub fn write_audit(rejections: &[Rejection], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    write_lines(rejections, path.as_ref())
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<ProgramRecord>, CorpusError> {
    let r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| CorpusError::Json { line: i + 1, source: e })?);
    }
    Ok(out)
}
