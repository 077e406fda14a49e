//! `mixgen`: train, generate, analyze and serve.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod args;
mod commands;
mod config;
mod manifest;
mod samples;

use std::process::ExitCode;

use clap::Parser;

use args::{AnalyzeCommand, Cli, Command};

/// An error that should exit with the usage code.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Train(a) => commands::train(a),
        Command::Generate(a) => commands::generate(a),
        Command::Analyze(AnalyzeCommand::Reduce(a)) => commands::reduce(a),
        Command::Analyze(AnalyzeCommand::Hull(a)) => commands::hull(a),
        Command::Analyze(AnalyzeCommand::Isomap(a)) => commands::isomap(a),
        Command::Analyze(AnalyzeCommand::Progression(a)) => commands::progression(a),
        Command::Analyze(AnalyzeCommand::Benchmark(a)) => commands::benchmark(a),
        Command::Serve(a) => commands::serve(a),
        Command::Calibrate(a) => commands::calibrate(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let argv = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::try_parse_from(argv).unwrap_or_else(|e| e.exit());
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<Usage>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
