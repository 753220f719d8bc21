use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::extract::{extract_functions, CandidateFunction, ExtractIssue};
use super::filters::{contamination, filter_magnitude, filter_signature};
use super::harness::{compile, ExecFailure};
use super::text::{preprocess, strip_comments};
use super::{CorpusError, InputBank, ProgramRecord};
use crate::hypernet::tokenize;
use crate::rng::derive_seed;

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusConfig {
    pub max_tokens: usize,
    pub max_arity: usize,
    pub out_limit: f64,
    pub timeout: Duration,
    pub io_rows: usize,
    pub seed: u64,
    pub jobs: usize,
    pub compiler: String,
    pub max_preprocess_passes: usize,
    pub determinism_runs: usize,
    pub train_fraction: f64,
    pub output_cap: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            max_tokens: 512,
            max_arity: 9,
            out_limit: 10.0,
            timeout: Duration::from_secs(8),
            io_rows: 2048,
            seed: 0,
            jobs: 1,
            compiler: std::env::var("CC").ok().filter(|s| !s.is_empty()).unwrap_or_else(|| "cc".into()),
            max_preprocess_passes: 2,
            determinism_runs: 5,
            train_fraction: 0.5,
            output_cap: 1 << 20,
        }
    }
}

/// Pipeline stages in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Preprocess,
    Extract,
    TokenLength,
    Arity,
    Signature,
    Execute,
    Determinism,
    Magnitude,
    Dedup,
    Decontaminate,
}

impl Stage {
    pub const ORDER: [Stage; 10] = [
        Stage::Preprocess,
        Stage::Extract,
        Stage::TokenLength,
        Stage::Arity,
        Stage::Signature,
        Stage::Execute,
        Stage::Determinism,
        Stage::Magnitude,
        Stage::Dedup,
        Stage::Decontaminate,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Stage::Preprocess => "preprocess",
            Stage::Extract => "extract",
            Stage::TokenLength => "token-length",
            Stage::Arity => "arity",
            Stage::Signature => "signature",
            Stage::Execute => "execute",
            Stage::Determinism => "determinism",
            Stage::Magnitude => "magnitude",
            Stage::Dedup => "dedup",
            Stage::Decontaminate => "decontaminate",
        }
    }
}

/// One audit entry: something removed at exactly one stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub provenance: String,
    pub function: Option<String>,
    pub stage: Stage,
    pub reason: String,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CorpusBuild {
    pub records: Vec<ProgramRecord>,
    pub rejections: Vec<Rejection>,
    pub files: usize,
    pub candidates: usize,
}

impl CorpusBuild {
    pub fn rejected_at(&self, stage: Stage) -> usize {
        self.rejections.iter().filter(|r| r.stage == stage).count()
    }
}

/// A source file handed to the pipeline.
#[derive(Clone, Debug)]
pub struct SourceFile {
    pub provenance: String,
    pub text: String,
    pub include_dir: Option<PathBuf>,
}

struct Survivor {
    index: usize,
    f: CandidateFunction,
    tokens: Vec<String>,
    outputs: Vec<f64>,
    notes: Vec<String>,
}

#[derive(Default)]
struct FileResult {
    survivors: Vec<Survivor>,
    rejections: Vec<Rejection>,
    candidates: usize,
}

fn reject(provenance: &str, function: Option<&str>, stage: Stage, reason: &str, detail: impl Into<String>) -> Rejection {
    Rejection {
        provenance: provenance.to_string(),
        function: function.map(str::to_string),
        stage,
        reason: reason.to_string(),
        detail: detail.into(),
    }
}

fn same_outputs(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()))
}

/// Runs one candidate through the per-function stages.
fn run_candidate(f: &CandidateFunction, bank: &InputBank, cfg: &CorpusConfig) -> Result<(Vec<String>, Vec<f64>), Rejection> {
    let name = Some(f.name.as_str());
    let prov = f.provenance.as_str();
    let tokens = tokenize(&f.source);
    if tokens.len() + 1 > cfg.max_tokens {
        return Err(reject(prov, name, Stage::TokenLength, "too-long", format!("{} tokens", tokens.len() + 1)));
    }
    if f.arity() > cfg.max_arity {
        return Err(reject(prov, name, Stage::Arity, "too-many-inputs", format!("arity {}", f.arity())));
    }
    if let Err(why) = filter_signature(f) {
        return Err(reject(prov, name, Stage::Signature, "non-numeric-signature", why));
    }
    let exec_err = |e: ExecFailure| reject(prov, name, Stage::Execute, e.label(), e.detail());
    let compiled = compile(f, bank, &cfg.compiler, cfg.timeout).map_err(exec_err)?;
    let outputs = compiled.run(1, cfg.timeout, cfg.output_cap).map_err(exec_err)?;
    let repeated = compiled
        .run(cfg.determinism_runs, cfg.timeout, cfg.output_cap)
        .map_err(|e| reject(prov, name, Stage::Determinism, e.label(), e.detail()))?;
    let rows = bank.rows();
    for pass in 0..cfg.determinism_runs {
        if !same_outputs(&repeated[pass * rows..(pass + 1) * rows], &outputs) {
            return Err(reject(prov, name, Stage::Determinism, "nondeterministic", format!("pass {pass} differs")));
        }
    }
    if let Err(why) = filter_magnitude(&outputs, cfg.out_limit) {
        return Err(reject(prov, name, Stage::Magnitude, "large-output", why));
    }
    Ok((tokens, outputs))
}

fn process_file(file: &SourceFile, bank: &InputBank, cfg: &CorpusConfig) -> FileResult {
    let prov = file.provenance.as_str();
    let mut res = FileResult::default();
    let pre = match preprocess(&file.text, &cfg.compiler, file.include_dir.as_deref(), cfg.max_preprocess_passes, cfg.timeout) {
        Ok(p) => p,
        Err(e) => {
            res.rejections.push(reject(prov, None, Stage::Preprocess, "preprocessor-failed", e));
            return res;
        }
    };
    let text = strip_comments(&pre.text);
    let (funcs, issues) = match extract_functions(&text, prov) {
        Ok(x) => x,
        Err(_) => {
            res.rejections.push(reject(prov, None, Stage::Extract, "unbalanced-braces", "file skipped"));
            return res;
        }
    };
    for issue in issues {
        if let ExtractIssue::Unrecognized { head } = issue {
            res.rejections.push(reject(prov, None, Stage::Extract, "unrecognized-definition", head));
        }
    }
    res.candidates = funcs.len();
    for (index, f) in funcs.into_iter().enumerate() {
        match run_candidate(&f, bank, cfg) {
            Ok((tokens, outputs)) => {
                let mut notes = vec![format!("preprocess passes: {}", pre.passes)];
                if f.empty_body {
                    log::warn!("{prov}: {} has an empty body", f.name);
                    notes.push("warning: empty body".into());
                }
                res.survivors.push(Survivor {
                    index,
                    f,
                    tokens,
                    outputs,
                    notes,
                });
            }
            Err(r) => res.rejections.push(r),
        }
    }
    res
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Runs every stage over `files` (processed in provenance order).
pub fn build_corpus(mut files: Vec<SourceFile>, bank: &InputBank, cfg: &CorpusConfig) -> Result<CorpusBuild, CorpusError> {
    if bank.rows() != cfg.io_rows || bank.width() < cfg.max_arity {
        return Err(CorpusError::Config(format!(
            "input bank is {}x{}, config needs {}x{}",
            bank.rows(),
            bank.width(),
            cfg.io_rows,
            cfg.max_arity
        )));
    }
    files.sort_by(|a, b| a.provenance.cmp(&b.provenance));
    let results: Vec<Mutex<Option<FileResult>>> = files.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..cfg.jobs.max(1).min(files.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= files.len() {
                    break;
                }
                let r = process_file(&files[i], bank, cfg);
                *results[i].lock().unwrap() = Some(r);
            });
        }
    });
    let mut build = CorpusBuild {
        files: files.len(),
        ..CorpusBuild::default()
    };
    let mut seen: HashMap<Vec<String>, String> = HashMap::new();
    for slot in results {
        let r = slot.into_inner().unwrap().unwrap_or_default();
        build.candidates += r.candidates;
        build.rejections.extend(r.rejections);
        for s in r.survivors {
            let id = format!("{}:{}:{}", s.f.provenance, s.index, s.f.name);
            if let Some(first) = seen.get(&s.tokens) {
                build.rejections.push(reject(&s.f.provenance, Some(&s.f.name), Stage::Dedup, "duplicate", format!("same tokens as {first}")));
                continue;
            }
            seen.insert(s.tokens.clone(), id.clone());
            if let Some(rule) = contamination(&s.f.source, s.f.arity()) {
                build.rejections.push(reject(&s.f.provenance, Some(&s.f.name), Stage::Decontaminate, rule.name(), "matches benchmark rule"));
                continue;
            }
            let rows: Vec<(Vec<f64>, f64)> = s
                .outputs
                .iter()
                .enumerate()
                .map(|(r, &o)| (bank.row(r)[..s.f.arity()].to_vec(), o))
                .collect();
            let split_seed = derive_seed(cfg.seed, &[fnv1a(&id)]);
            let (io, train_rows) = ProgramRecord::split_rows(rows, split_seed, cfg.train_fraction);
            build.records.push(ProgramRecord {
                id,
                name: s.f.name.clone(),
                provenance: s.f.provenance.clone(),
                return_type: s.f.return_type.clone(),
                param_types: s.f.params.iter().map(|p| p.ty.clone()).collect(),
                source: s.f.source.clone(),
                tokens: s.tokens,
                arity: s.f.arity(),
                io,
                split_seed,
                train_rows,
                audit: s.notes,
            });
        }
    }
    Ok(build)
}

/// Every `.c` file under `root`, with provenance relative to `root`.
pub fn collect_sources(root: &Path) -> Result<Vec<SourceFile>, CorpusError> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let mut entries: Vec<_> = std::fs::read_dir(&dir)?.collect::<Result<_, _>>()?;
        entries.sort_by_key(|e| e.file_name());
        for e in entries {
            let path = e.path();
            let ft = e.file_type()?;
            if ft.is_dir() {
                stack.push(path);
            } else if ft.is_file() && path.extension().is_some_and(|x| x == "c") {
                let bytes = std::fs::read(&path)?;
                let rel = path.strip_prefix(root).unwrap_or(&path).to_string_lossy().replace('\\', "/");
                out.push(SourceFile {
                    provenance: rel,
                    text: String::from_utf8_lossy(&bytes).into_owned(),
                    include_dir: path.parent().map(Path::to_path_buf),
                });
            }
        }
    }
    out.sort_by(|a, b| a.provenance.cmp(&b.provenance));
    Ok(out)
}

/// Builds from in-memory sources named `prefix-0000.c`, `prefix-0001.c`, ...
pub fn sources_from_strings(prefix: &str, sources: &[String]) -> Vec<SourceFile> {
    sources
        .iter()
        .enumerate()
        .map(|(i, s)| SourceFile {
            provenance: format!("{prefix}-{i:04}.c"),
            text: s.clone(),
            include_dir: None,
        })
        .collect()
}
