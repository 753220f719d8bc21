//! Flat `key = value` config files, merged into the argument list.
//!
//! Config entries become `--key=value` flags placed ahead of the user's own
//! flags, and every subcommand lets a later occurrence override an earlier
//! one, so command-line flags win over the file and the file wins over
//! built-in defaults.

use std::path::PathBuf;

use crate::error::CliError;

/// Flags that name a config file.
const CONFIG_FLAGS: [&str; 2] = ["--config", "--plan"];

/// Subcommands that nest a second level.
const NESTED: [&str; 1] = ["baseline-train"];

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", n + 1)))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", n + 1)));
        }
        if CONFIG_FLAGS.contains(&format!("--{key}").as_str()) {
            return Err(CliError::Usage(format!("config line {}: config files cannot include other configs", n + 1)));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(args: &[String]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        for flag in CONFIG_FLAGS {
            if a == flag {
                return it.next().map(PathBuf::from);
            }
            if let Some(v) = a.strip_prefix(flag).and_then(|r| r.strip_prefix('=')) {
                return Some(PathBuf::from(v));
            }
        }
    }
    None
}

/// Splices the referenced config file's entries into `argv`.
pub fn expand_args(argv: Vec<String>) -> Result<Vec<String>, CliError> {
    if argv.len() < 2 || argv[1].starts_with('-') {
        return Ok(argv);
    }
    let mut leaf = 1;
    if NESTED.contains(&argv[1].as_str()) && argv.get(2).is_some_and(|a| !a.starts_with('-')) {
        leaf = 2;
    }
    let Some(path) = config_path(&argv[leaf + 1..]) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::MissingFile(path.clone()),
        _ => e.into(),
    })?;
    let entries = parse_config(&text)?;
    let mut out: Vec<String> = argv[..=leaf].to_vec();
    out.extend(entries.into_iter().map(|(k, v)| format!("--{k}={v}")));
    out.extend_from_slice(&argv[leaf + 1..]);
    Ok(out)
}
