//! Command-line front end for the frequency-comb memory simulator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;

use crate::commands::Command;
use crate::config::{parse_config, parse_str, LoadedConfig};
use crate::error::CliError;
use crate::output::{sha256_hex, OutputDir, RunManifest, RESOLVED_CONFIG_NAME};

#[derive(Debug, Parser)]
#[command(
    name = "combmem",
    version,
    about = "Frequency-comb microwave memory simulator"
)]
pub struct Cli {
    /// TOML configuration; every key is optional.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(
        long,
        global = true,
        env = "COMBMEM_OUT",
        default_value = "combmem-out"
    )]
    pub out: PathBuf,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Time step in seconds, overriding `solver.dt_s`.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

fn load(cli: &Cli) -> Result<LoadedConfig, CliError> {
    let mut loaded = match &cli.config {
        Some(path) => parse_config(path)?,
        None => parse_str("")?,
    };
    if let Some(dt) = cli.dt {
        loaded.config.solver.dt_s = Some(dt);
        loaded.defaulted.retain(|k| k != "solver.dt_s");
        loaded.config.validate()?;
    }
    Ok(loaded)
}

/// Runs one subcommand end to end. On failure nothing written by this run is left behind.
pub fn run(cli: &Cli) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let loaded = load(cli)?;
    let jobs = cli.jobs.unwrap_or_else(rayon::current_num_threads);
    if jobs == 0 {
        return Err(combmem::Error::InvalidArgument("--jobs must be at least 1".into()).into());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    let mut out = OutputDir::create(&cli.out)?;
    let result = pool.install(|| {
        let summary = cli.command.run(&loaded.config, &mut out)?;
        out.write(RESOLVED_CONFIG_NAME, |w| {
            w.extend_from_slice(loaded.config.to_toml().as_bytes());
            Ok(())
        })?;
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: cli.command.name().to_string(),
            config_path: cli.config.as_ref().map(|p| p.display().to_string()),
            config_sha256: sha256_hex(&loaded.source),
            resolved_config: loaded.config.clone(),
            defaulted_keys: loaded.defaulted.clone(),
            jobs,
            files: out.files().to_vec(),
            summary,
            duration_s: start.elapsed().as_secs_f64(),
        };
        manifest.write(out.path())?;
        Ok(manifest)
    });
    if result.is_err() {
        out.discard();
    }
    result
}
