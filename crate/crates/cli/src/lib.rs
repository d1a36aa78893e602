//! `ham`: command-line front end of `ham-core`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error,
//! 3 invariant violation, 4 integrity failure.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Worker-count variable; the only environment input.
pub const THREADS_ENV: &str = "HAM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ham", version, about = "Chaos brackets, spectral identities and Monte Carlo for the hyperbolic Anderson model")]
pub struct Cli {
    /// Flat key = value configuration file; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "ham-out", value_name = "DIR")]
    pub out: PathBuf,
    /// Append-only file of computed C_alpha values, reused across runs.
    #[arg(long, global = true, value_name = "FILE")]
    pub cache: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// C_alpha table, scaling-law check and divergence probe.
    Spectral(SpectralArgs),
    /// Per-term chaos brackets, series sums, QMC estimates and growth-rate brackets.
    Chaos(ChaosArgs),
    /// Monte Carlo moments and growth-rate fits.
    Simulate(SimulateArgs),
    /// Verify manifests and compare runs.
    Report {
        #[arg(required = true, value_name = "MANIFEST")]
        manifests: Vec<PathBuf>,
    },
    /// Re-run a manifest and compare checksums.
    Replay {
        #[arg(value_name = "MANIFEST")]
        manifest: PathBuf,
    },
    /// Print the configuration schema.
    Schema,
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    #[arg(long = "H", value_name = "H")]
    pub hurst: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub eta: Option<String>,
    #[arg(long, value_name = "wave|heat")]
    pub kernel: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
}

#[derive(Debug, Args)]
pub struct SpectralArgs {
    #[arg(long, allow_hyphen_values = true, value_name = "LIST")]
    pub alpha: Option<String>,
    #[arg(long, value_name = "wave|heat")]
    pub kernel: Option<String>,
    #[arg(long = "scaling-t", value_name = "LIST")]
    pub scaling_t: Option<String>,
    #[arg(long = "probe-H", value_name = "H")]
    pub probe_h: Option<String>,
    #[arg(long, value_name = "LIST")]
    pub cutoffs: Option<String>,
}

#[derive(Debug, Args)]
pub struct ChaosArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, visible_alias = "T")]
    pub t: Option<String>,
    #[arg(long = "qmc-n")]
    pub qmc_n: Option<String>,
    #[arg(long = "qmc-points")]
    pub qmc_points: Option<String>,
    #[arg(long = "qmc-randomizations")]
    pub qmc_randomizations: Option<String>,
    #[arg(long = "series-tol")]
    pub series_tol: Option<String>,
    #[arg(long, value_name = "LIST")]
    pub p: Option<String>,
    #[arg(long, value_name = "START,END")]
    pub window: Option<String>,
    #[arg(long = "window-points")]
    pub window_points: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long = "T", visible_alias = "t")]
    pub t: Option<String>,
    #[arg(long)]
    pub dt: Option<String>,
    #[arg(long)]
    pub dx: Option<String>,
    #[arg(long = "L")]
    pub l: Option<String>,
    #[arg(long = "obs-x", allow_hyphen_values = true, value_name = "LIST")]
    pub obs_x: Option<String>,
    #[arg(long)]
    pub samples: Option<String>,
    #[arg(long, value_name = "LIST")]
    pub p: Option<String>,
    #[arg(long = "moment-stride")]
    pub moment_stride: Option<String>,
    #[arg(long)]
    pub sweeps: Option<String>,
    #[arg(long, value_name = "START,END")]
    pub window: Option<String>,
    #[arg(long)]
    pub allowance: Option<String>,
    /// Record every cell.
    #[arg(long = "record-full")]
    pub record_full: bool,
    /// Write the recorded field to field.bin.
    #[arg(long)]
    pub dump: bool,
}

fn overlay(pairs: &[(&str, &Option<String>)]) -> CliResult<RunConfig> {
    let mut c = RunConfig::new();
    for (k, v) in pairs {
        if let Some(v) = v {
            c.set(k, v)?;
        }
    }
    Ok(c)
}

impl ModelArgs {
    fn pairs(&self) -> [(&'static str, &Option<String>); 5] {
        [
            ("H", &self.hurst),
            ("lambda", &self.lambda),
            ("eta", &self.eta),
            ("kernel", &self.kernel),
            ("seed", &self.seed),
        ]
    }
}

impl Command {
    /// Configuration values given as flags.
    pub fn flags(&self) -> CliResult<RunConfig> {
        match self {
            Command::Spectral(a) => overlay(&[
                ("alpha", &a.alpha),
                ("kernel", &a.kernel),
                ("scaling_t", &a.scaling_t),
                ("probe_H", &a.probe_h),
                ("cutoffs", &a.cutoffs),
            ]),
            Command::Chaos(a) => {
                let mut v = a.model.pairs().to_vec();
                v.extend([
                    ("t", &a.t),
                    ("qmc_n", &a.qmc_n),
                    ("qmc_points", &a.qmc_points),
                    ("qmc_randomizations", &a.qmc_randomizations),
                    ("series_tol", &a.series_tol),
                    ("p", &a.p),
                    ("window", &a.window),
                    ("window_points", &a.window_points),
                ]);
                overlay(&v)
            }
            Command::Simulate(a) => {
                let mut v = a.model.pairs().to_vec();
                v.extend([
                    ("t", &a.t),
                    ("dt", &a.dt),
                    ("dx", &a.dx),
                    ("L", &a.l),
                    ("obs_x", &a.obs_x),
                    ("samples", &a.samples),
                    ("p", &a.p),
                    ("moment_stride", &a.moment_stride),
                    ("sweeps", &a.sweeps),
                    ("window", &a.window),
                    ("allowance", &a.allowance),
                ]);
                let mut c = overlay(&v)?;
                if a.record_full {
                    c.set("record_full", "true")?;
                }
                if a.dump {
                    c.set("dump", "true")?;
                }
                Ok(c)
            }
            Command::Report { .. } | Command::Replay { .. } | Command::Schema => Ok(RunConfig::new()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectral(_) => "spectral",
            Command::Chaos(_) => "chaos",
            Command::Simulate(_) => "simulate",
            Command::Report { .. } => "report",
            Command::Replay { .. } => "replay",
            Command::Schema => "schema",
        }
    }
}

/// Sizes the global worker pool from [`THREADS_ENV`], if set.
pub fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(format!("worker pool: {e}")))
}

pub fn run(cli: &Cli) -> CliResult<()> {
    init_threads()?;
    match &cli.command {
        Command::Schema => {
            print!("{}", config::schema_doc());
            Ok(())
        }
        Command::Report { manifests } => commands::report(manifests, &cli.out),
        Command::Replay { manifest } => {
            let m = commands::replay(manifest, &cli.out)?;
            println!("replay: {} outputs reproduced", m.outputs.len());
            Ok(())
        }
        cmd => {
            let cfg = commands::resolve_config(cmd.name(), cli.config.as_deref(), &cmd.flags()?)?;
            let m = commands::execute(cmd.name(), &cfg, &cli.out, cli.cache.as_deref())?;
            for o in &m.outputs {
                println!("{}  {}", o.sha256, cli.out.join(&o.path).display());
            }
            Ok(())
        }
    }
}
