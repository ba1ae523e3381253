//! Command-line driver: configuration, subcommands and artifact writing.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use bohmchaos::io::Manifest;

pub use commands::Command;
pub use config::{parse_config, parse_config_with, ExperimentConfig, Overrides};
pub use error::{CliError, CliResult};

/// Reads the configuration, runs `command` and writes `manifest.json`
/// next to its artifacts. A run dominated by aborts still writes every
/// artifact before returning [`CliError::Aborted`].
pub fn execute(command: Command, config: Option<&PathBuf>, overrides: &Overrides) -> CliResult<ExperimentConfig> {
    let text = match config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::config(None, format!("cannot read {}: {e}", path.display())))?,
        None => String::new(),
    };
    let cfg = parse_config_with(&text, overrides)?;
    let started = Instant::now();
    let mut out = output::Outputs::create(&cfg.out)?;
    let dominated = commands::run(command, &cfg, &mut out)?;
    let mut manifest = Manifest::new(command.name(), cfg.canonical(), cfg.seed, cfg.params.epsilon);
    manifest.wall_seconds = started.elapsed().as_secs_f64();
    manifest.artifacts = out.artifacts.clone();
    manifest.summary = out.summary.clone();
    if let Some(reason) = &dominated {
        manifest.summary.insert("dominated".into(), reason.clone().into());
    }
    let mut f = File::create(cfg.out.join("manifest.json"))?;
    manifest.write(&mut f)?;
    f.flush()?;
    match dominated {
        Some(reason) => Err(CliError::Aborted(reason)),
        None => Ok(cfg),
    }
}
