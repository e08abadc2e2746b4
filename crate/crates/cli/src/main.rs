use std::process::ExitCode;

use clap::Parser;
use mimalloc::MiMalloc;

mod args;
mod commands;
mod config;

use args::{Cli, Command};

#[global_allocator]
static GLOBAL: MiMalloc = MiMalloc;

/// Invalid arguments or configuration; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<osv_core::Error>() {
            return match e {
                osv_core::Error::Config(_) | osv_core::Error::Usage(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(UsageError("thread count must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Synth(a) => commands::synth::run(a).map(drop),
        Command::Pretrain(a) => commands::pretrain::run(a),
        Command::Extract(a) => commands::extract::run(a),
        Command::TrainVerifiers(a) => commands::train_verifiers::run(a),
        Command::Evaluate(a) => commands::evaluate::run(a).map(drop),
        Command::Report(a) => commands::report::run(a),
        Command::Pipeline(a) => commands::pipeline::run(a).map(drop),
    }
}

fn main() -> ExitCode {
    let args = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp_secs()
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
