use std::path::PathBuf;
use std::process::ExitCode;

use bohmchaos_cli::{execute, Command, Overrides};
use clap::Parser;

/// Bohmian and classical chaos experiments for the perturbed oscillator pair.
#[derive(Debug, Parser)]
#[command(name = "bohmchaos", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, allow_negative_numbers = true)]
    epsilon: Option<f64>,

    #[arg(long = "t-end", global = true)]
    t_end: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        epsilon: cli.epsilon,
        seed: cli.seed,
        t_end: cli.t_end,
        out: cli.out,
    };
    match execute(cli.command, cli.config.as_ref(), &overrides) {
        Ok(cfg) => {
            println!("{}: artifacts in {}", cli.command.name(), cfg.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
