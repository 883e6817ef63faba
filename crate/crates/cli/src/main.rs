//! `reverb-forge` command-line entry point.
//!
//! Exit codes: 0 success, 1 invalid arguments/config/data, 2 I/O failure.
//! Failures print one JSON object on the last line of standard error.

mod args;
mod commands;
mod record;

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::Parser;
use reverb_forge::config::{ConfigOverlay, RunConfig, SEED_ENV};

use crate::args::Cli;

const EXIT_VALIDATION: u8 = 1;
const EXIT_IO: u8 = 2;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<reverb_forge::Error>() {
            return if e.is_io() { EXIT_IO } else { EXIT_VALIDATION };
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
        if let Some(e) = cause.downcast_ref::<csv::Error>() {
            return if e.is_io_error() { EXIT_IO } else { EXIT_VALIDATION };
        }
    }
    EXIT_VALIDATION
}

/// The error chain joined with ": ", skipping causes whose text the
/// previous message already ends with.
fn chain_message(err: &anyhow::Error) -> String {
    let mut message = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if message.ends_with(&text) {
            continue;
        }
        if !message.is_empty() {
            message.push_str(": ");
        }
        message.push_str(&text);
    }
    message
}

fn fail(message: String, code: u8) -> ExitCode {
    let kind = if code == EXIT_IO { "io" } else { "validation" };
    eprintln!("{}", serde_json::json!({ "error": message, "kind": kind, "exit_code": code }));
    ExitCode::from(code)
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str::<ConfigOverlay>(&text)
                .map_err(|e| reverb_forge::Error::InvalidArgument(format!("config {}: {}", path.display(), e.message())))?
        }
        None => ConfigOverlay::default(),
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    Ok(RunConfig::layered(env_seed.as_deref(), &[&file, &cli.overlay()])?)
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new().num_threads(n.into()).build_global()?;
    }
    let config = load_config(cli)?;
    commands::run(cli, &config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            return fail("a subcommand is required (see --help)".into(), EXIT_VALIDATION);
        }
        Err(e) => {
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            return fail(first.trim_start_matches("error: ").to_string(), EXIT_VALIDATION);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(chain_message(&e), exit_code(&e)),
    }
}
