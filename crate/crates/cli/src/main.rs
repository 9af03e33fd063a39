mod args;
mod commands;
mod rundir;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;

use args::{Cli, Command};
use commands::{referenced_inputs, resolve_seeds, Ctx};
use rundir::{RunConfig, RunDir};

fn execute(cli: Cli) -> Result<()> {
    let mut cmd = match cli.cmd {
        Command::Replay { config } => {
            let recorded = RunConfig::load(&config)?;
            if matches!(recorded.command, Command::Replay { .. }) {
                anyhow::bail!("{} records a replay", config.display());
            }
            println!("replaying {}", config.display());
            recorded.command
        }
        other => other,
    };
    for seed in resolve_seeds(&mut cmd) {
        println!("seed: {seed}");
    }
    let config = RunConfig::new(cmd.clone(), referenced_inputs(&cmd)?);
    let dir = RunDir::create(&cli.global.out, cli.global.run_dir.as_deref(), &config)?;
    println!("run directory: {}", dir.path.display());
    let ctx = Ctx { dir, jobs: cli.global.jobs, hash: config.hash.clone() };
    commands::run(&cmd, &ctx)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
