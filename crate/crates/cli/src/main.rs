// SPDX-License-Identifier: Apache-2.0

//! `cgaps`: synthesize suites, analyze them, probe robustness, list gaps and
//! serve the explorer API.

mod commands;
mod error;
mod run;

use clap::{Parser, Subcommand};

use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "cgaps", version, about = "Concept-level coverage and competency-gap analysis")]
struct Cli {
    /// Worker threads for loading and analysis (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded synthetic suite (dictionary, record files, suite manifest).
    Synth(commands::synth::SynthArgs),
    /// Compute coverage and performance scores and write reports.
    Analyze(commands::analyze::AnalyzeArgs),
    /// Subsampling stability or adversarial ablation.
    Robustness(commands::robustness::RobustnessArgs),
    /// List missing, under- and overrepresented concepts and model gaps.
    Gaps(commands::gaps::GapsArgs),
    /// Serve a bundle or an analysis directory over HTTP.
    Serve(commands::serve::ServeArgs),
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(error::CliError::validation("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| error::CliError::validation(e.to_string()))?;
    }
    match cli.command {
        Command::Synth(a) => commands::synth::run(a),
        Command::Analyze(a) => commands::analyze::run(a),
        Command::Robustness(a) => commands::robustness::run(a),
        Command::Gaps(a) => commands::gaps::run(a),
        Command::Serve(a) => commands::serve::run(a, cli.threads),
    }
}

fn main() {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.code());
    }
}
