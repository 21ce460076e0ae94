mod args;
mod commands;
mod output;
mod validate;

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use args::{Cli, Command};

/// Exit status when a command completed but reported flagged points, failed
/// checks or an unusable verdict.
const EXIT_PROBLEMS: u8 = 2;

fn init_threads(flag: Option<usize>) -> Result<()> {
    let env = std::env::var("MIRRORFREQ_THREADS").ok();
    let n = match env {
        Some(v) => Some(
            v.parse::<usize>()
                .with_context(|| format!("MIRRORFREQ_THREADS: not a thread count: {v:?}"))?,
        ),
        None => flag,
    };
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<Vec<String>> {
    init_threads(cli.threads)?;
    let argv: Vec<String> = std::env::args().collect();
    let ctx = output::Context::new(argv.join(" "));
    match cli.command {
        Command::Sweep(a) => commands::sweep(&ctx, &a),
        Command::Gnc(a) => commands::gnc(&ctx, &a),
        Command::CompareOriginal(a) => commands::compare_original(&ctx, &a),
        Command::MfdCheck(a) => commands::mfd_check(&ctx, &a),
        Command::StepSim(a) => commands::step_sim(&ctx, &a),
        Command::Validate(a) => validate::run(&a),
        Command::DumpConfig(a) => commands::dump_config(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(problems) if problems.is_empty() => ExitCode::SUCCESS,
        Ok(problems) => {
            for p in &problems {
                eprintln!("problem: {p}");
            }
            ExitCode::from(EXIT_PROBLEMS)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
