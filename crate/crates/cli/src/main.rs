mod args;
mod commands;
mod config;
mod error;
mod manifest;

use clap::{ArgMatches, CommandFactory, FromArgMatches};

use args::Cli;
use error::CliError;
use manifest::RunManifest;

/// Effective value of every flag of the innermost subcommand.
fn snapshot(cmd: &clap::Command, m: &ArgMatches) -> Vec<(String, String)> {
    if let Some((name, sub)) = m.subcommand() {
        if let Some(sc) = cmd.find_subcommand(name) {
            return snapshot(sc, sub);
        }
    }
    let mut out = Vec::new();
    for arg in cmd.get_arguments() {
        let id = arg.get_id().as_str();
        if id == "config" || id == "help" || id == "version" {
            continue;
        }
        if let Ok(Some(vals)) = m.try_get_raw(id) {
            let joined: Vec<String> = vals.map(|v| v.to_string_lossy().into_owned()).collect();
            out.push((arg.get_long().unwrap_or(id).to_string(), joined.join(",")));
        }
    }
    out
}

fn real_main() -> Result<(), CliError> {
    let argv: Vec<String> = std::env::args().collect();
    let expanded = config::expand_args(argv.clone())?;
    let cmd = Cli::command();
    let matches = match cmd.clone().try_get_matches_from(&expanded) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                e.exit();
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return Err(CliError::Usage(first.to_string()));
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut manifest = RunManifest::new(argv, snapshot(&cmd, &matches));
    commands::run(cli.command, &mut manifest)?;
    if let Some(path) = manifest.finish()? {
        log::info!("manifest {}", path.display());
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = real_main() {
        eprintln!("{}", e.render());
        std::process::exit(e.exit_code());
    }
}
