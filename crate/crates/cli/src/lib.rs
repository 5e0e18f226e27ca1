//! Command-line front end for the `eqspec` library.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod output;
pub mod specs;

use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure in stage {stage}: {message}")]
    Numerical { stage: String, message: String },
    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    pub fn numerical(stage: &str, e: impl std::fmt::Display) -> Self {
        CliError::Numerical {
            stage: stage.to_string(),
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io { .. } => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "eqspec", version, about = "Equivariant spectra and inverse spectral reconstruction on S^2")]
pub struct Cli {
    /// TOML run configuration; defaults apply to anything not given.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Profile spec, e.g. round_sphere or perturbed_well:0,0,1,0.3
    #[arg(long, global = true)]
    pub profile: Option<String>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues of the weight-m Laplacians: spectrum.csv (m, k, lambda).
    Spectrum(SpectrumArgs),
    /// Spectral measure against the two-term expansion: measure.csv.
    Measure(MeasureArgs),
    /// The curves W(λ), Q(λ): invariants.csv (lambda, W, Q).
    Invariants(InvariantsArgs),
    /// The symbols b_k and the expansion integrands: symbols.txt.
    Symbols(SymbolsArgs),
    /// Reconstruct v from a CSV of (lambda, W, Q).
    Reconstruct(ReconstructArgs),
    /// Forward invariants of a profile followed by reconstruction.
    Roundtrip(RoundtripArgs),
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Inclusive range of weights, e.g. 0..5
    #[arg(long)]
    pub m_range: Option<String>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    #[arg(long)]
    pub cells: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Comma-separated weights, e.g. 16,24,32
    #[arg(long, allow_hyphen_values = true)]
    pub modes: Option<String>,
    /// Test function, e.g. indicator:4:0.1 or bump:2:0.5
    #[arg(long)]
    pub rho: Option<String>,
    #[arg(long)]
    pub cells: Option<usize>,
}

#[derive(Debug, Args)]
pub struct InvariantsArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// default:N or linspace:lo:hi:N
    #[arg(long)]
    pub lambda_grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct SymbolsArgs {
    #[arg(long)]
    pub max_order: Option<u32>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// CSV with header lambda,W,Q
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RoundtripArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
}

impl Cli {
    /// The config file with command-line overrides applied and validated.
    pub fn resolve_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.profile {
            cfg.set_profile(p)?;
        }
        if let Some(t) = self.threads {
            cfg.run.threads = t;
        }
        match &self.command {
            Command::Spectrum(a) => {
                if let Some(v) = &a.m_range {
                    cfg.spectrum.m_range = v.clone();
                }
                if let Some(v) = a.lambda_max {
                    cfg.spectrum.lambda_max = v;
                }
                if let Some(v) = a.cells {
                    cfg.spectrum.cells = v;
                }
            }
            Command::Measure(a) => {
                if let Some(v) = a.alpha {
                    cfg.measure.alpha = v;
                }
                if let Some(v) = &a.modes {
                    cfg.measure.modes = specs::ModeRange::parse(v)?.0;
                }
                if let Some(v) = &a.rho {
                    cfg.measure.rho = v.clone();
                }
                if let Some(v) = a.cells {
                    cfg.measure.cells = v;
                }
            }
            Command::Invariants(a) => {
                if let Some(v) = a.alpha {
                    cfg.invariants.alpha = v;
                }
                if let Some(v) = &a.lambda_grid {
                    cfg.invariants.lambda_grid = v.clone();
                }
            }
            Command::Symbols(a) => {
                if let Some(v) = a.max_order {
                    cfg.symbols.max_order = v;
                }
            }
            Command::Reconstruct(a) => {
                if let Some(v) = &a.input {
                    cfg.inverse.input = Some(v.clone());
                }
                if let Some(v) = a.alpha {
                    cfg.inverse.alpha = v;
                }
            }
            Command::Roundtrip(a) => {
                if let Some(v) = a.alpha {
                    cfg.inverse.alpha = v;
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs one subcommand and returns the output directory.
pub fn run(cli: &Cli) -> Result<PathBuf, CliError> {
    let cfg = cli.resolve_config()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let mut out = output::Outputs::create(&cfg)?;
    let name = pool.install(|| -> Result<&'static str, CliError> {
        Ok(match &cli.command {
            Command::Spectrum(_) => {
                commands::spectrum(&cfg, &mut out)?;
                "spectrum"
            }
            Command::Measure(_) => {
                commands::measure(&cfg, &mut out)?;
                "measure"
            }
            Command::Invariants(_) => {
                commands::invariants(&cfg, &mut out)?;
                "invariants"
            }
            Command::Symbols(_) => {
                commands::symbols(&cfg, &mut out)?;
                "symbols"
            }
            Command::Reconstruct(_) => {
                commands::reconstruct(&cfg, &mut out)?;
                "reconstruct"
            }
            Command::Roundtrip(_) => {
                commands::roundtrip(&cfg, &mut out)?;
                "roundtrip"
            }
        })
    })?;
    out.manifest(name, &cfg, pool.current_num_threads(), start.elapsed())
}
