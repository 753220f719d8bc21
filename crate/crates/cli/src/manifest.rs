use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_VERSION: u32 = 1;

/// Plain-text record of one invocation.
///
/// Artifacts never embed timestamps, so rerunning the recorded command line
/// reproduces every artifact hash.
#[derive(Clone, Debug, Default)]
pub struct RunManifest {
    pub command: Vec<String>,
    /// Every flag of the subcommand with its effective value.
    pub config: Vec<(String, String)>,
    pub seeds: Vec<(String, u64)>,
    pub artifacts: Vec<PathBuf>,
    pub started: u64,
    pub finished: u64,
    /// Where the manifest is written; `None` for commands without outputs.
    pub location: Option<PathBuf>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Manifest path for a single-file artifact.
pub fn sibling(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn new(command: Vec<String>, config: Vec<(String, String)>) -> Self {
        Self {
            command,
            config,
            started: now(),
            ..Self::default()
        }
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.push((name.to_string(), value));
    }

    pub fn artifact(&mut self, path: impl Into<PathBuf>) {
        self.artifacts.push(path.into());
    }

    pub fn render(&self) -> Result<String, CliError> {
        let mut s = String::new();
        let _ = writeln!(s, "manifest-version = {MANIFEST_VERSION}");
        let _ = writeln!(s, "command = {}", self.command.join(" "));
        let _ = writeln!(s, "started = {}", self.started);
        let _ = writeln!(s, "finished = {}", self.finished);
        for (k, v) in &self.config {
            let _ = writeln!(s, "config.{k} = {v}");
        }
        for (k, v) in &self.seeds {
            let _ = writeln!(s, "seed.{k} = {v}");
        }
        for a in &self.artifacts {
            let _ = writeln!(s, "artifact.{} = sha256:{}", a.display(), sha256_file(a)?);
        }
        Ok(s)
    }

    pub fn finish(&mut self) -> Result<Option<PathBuf>, CliError> {
        self.finished = now();
        let Some(path) = self.location.clone() else {
            return Ok(None);
        };
        std::fs::write(&path, self.render()?)?;
        Ok(Some(path))
    }
}
