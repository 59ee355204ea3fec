mod args;
mod commands;
mod dataset;
mod error;
mod runlog;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use error::CliError;

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = cli.common.effective()?;
    if let Some(jobs) = cli.common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    }
    let run_log = cli.common.run_log.clone();
    match &cli.command {
        Command::Synth(a) => commands::synth::run(a, &cfg, run_log),
        Command::Centroids(a) => commands::centroids::run(a, &cfg, run_log),
        Command::Pmg(a) => commands::pmg::run(a, &cfg, run_log),
        Command::Update(a) => commands::update::run(a, &cfg, run_log),
        Command::Eval(a) => commands::eval::run(a, &cfg, run_log),
        Command::Sweep(a) => commands::sweep::run(a, &cfg, run_log),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return if usage_error { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
