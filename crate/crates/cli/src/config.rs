//! Command-line flags, the flat TOML config file, and their merge into a
//! validated [`ExperimentConfig`].

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use occulab_core::functions::TestFunction;
use occulab_core::occupation::PathEngine;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SEED_ENV: &str = "OCCULAB_SEED";
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Parser)]
#[command(name = "occulab", version, about = "Occupation-time limit-law laboratory for fractional Brownian motion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    SimulateFbm,
    Constants,
    Verify,
    LimitLaw,
    FirstOrder,
    Fdd,
    Zprocess,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::SimulateFbm => "simulate-fbm",
            Self::Constants => "constants",
            Self::Verify => "verify",
            Self::LimitLaw => "limit-law",
            Self::FirstOrder => "first-order",
            Self::Fdd => "fdd",
            Self::Zprocess => "zprocess",
        }
    }

    /// Commands that simulate at the critical index `H = 1/d`.
    pub fn is_critical(self) -> bool {
        matches!(self, Self::LimitLaw | Self::FirstOrder | Self::Fdd)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample fBm paths and compare increment autocovariances with fGn
    SimulateFbm(Options),
    /// Evaluate C_{f,d}, the bracket and the analytic identities
    Constants(Options),
    /// Sweep the covariance inequalities
    Verify(Options),
    /// Second-order law of the normalized occupation functional
    LimitLaw(Options),
    /// First-order law for a positive integrable f
    FirstOrder(Options),
    /// Joint law of increments over disjoint intervals
    Fdd(Options),
    /// Random-walk approximation of the time change Z(t)
    Zprocess(Options),
}

impl Command {
    pub fn split(self) -> (CommandKind, Options) {
        match self {
            Self::SimulateFbm(o) => (CommandKind::SimulateFbm, o),
            Self::Constants(o) => (CommandKind::Constants, o),
            Self::Verify(o) => (CommandKind::Verify, o),
            Self::LimitLaw(o) => (CommandKind::LimitLaw, o),
            Self::FirstOrder(o) => (CommandKind::FirstOrder, o),
            Self::Fdd(o) => (CommandKind::Fdd, o),
            Self::Zprocess(o) => (CommandKind::Zprocess, o),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    All,
    Cov,
    Taylor,
    Lnd,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Circulant,
    Cholesky,
}

/// Every setting, optional so that flags can override the config file.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    /// Flat TOML file with any of the keys below
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Hurst index; must equal 1/dim for critical runs
    #[arg(long)]
    pub hurst: Option<f64>,
    /// Require the critical index H = 1/dim
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub critical: Option<bool>,
    /// Test function, e.g. gaussdiff:sigma=2, gauss, zero
    #[arg(long)]
    pub function: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub t_list: Option<Vec<f64>>,
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Grid spacing in original time units
    #[arg(long)]
    pub spacing: Option<f64>,
    /// Falls back to the OCCULAB_SEED environment variable
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Path engine for occupation integrals
    #[arg(long)]
    pub engine: Option<String>,
    /// Disjoint intervals `a:b`, comma separated
    #[arg(long, value_delimiter = ',', value_parser = parse_interval)]
    pub intervals: Option<Vec<(f64, f64)>>,
    #[arg(long)]
    pub walk_steps: Option<u64>,
    #[arg(long, value_enum)]
    pub check: Option<CheckKind>,
    /// Random trials of the covariance-bound sweep
    #[arg(long)]
    pub trials: Option<u64>,
    /// Random trials per point count of the nondeterminism sweep
    #[arg(long)]
    pub lnd_trials: Option<u64>,
    /// Grid steps of simulated fBm paths
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, value_enum)]
    pub sampler: Option<SamplerKind>,
}

fn parse_interval(text: &str) -> Result<(f64, f64), String> {
    let (a, b) = text.split_once(':').ok_or_else(|| format!("interval `{text}` must look like a:b"))?;
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("interval `{text}`: {e}"));
    Ok((parse(a)?, parse(b)?))
}

macro_rules! merge_fields {
    ($flags:ident, $file:ident; $($field:ident),*) => {
        Options { config: None, $($field: $flags.$field.or($file.$field),)* }
    };
}

impl Options {
    /// Flags take precedence over the file.
    pub fn merge_over(self, file: Options) -> Options {
        let flags = self;
        merge_fields!(flags, file; dim, hurst, critical, function, n_list, t_list, replicas, spacing, seed,
            output_dir, workers, engine, intervals, walk_steps, check, trials, lnd_trials, steps, sampler)
    }

    pub fn from_file(path: &Path) -> Result<Options, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config file {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Input(format!("config file {}: {e}", path.display())))
    }
}

/// Fully resolved and validated configuration.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    pub dim: usize,
    pub hurst: f64,
    pub critical: bool,
    pub function: TestFunction,
    pub n_list: Vec<f64>,
    pub t_list: Vec<f64>,
    pub replicas: usize,
    pub spacing: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub workers: usize,
    pub engine: PathEngine,
    pub intervals: Vec<(f64, f64)>,
    pub walk_steps: u64,
    pub check: CheckKind,
    pub trials: u64,
    pub lnd_trials: u64,
    pub steps: usize,
    pub sampler: SamplerKind,
}

fn input<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Input(msg.into()))
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|e| CliError::Input(format!("{SEED_ENV}=`{v}` is not a 64-bit seed: {e}"))),
        Err(_) => Ok(None),
    }
}

impl ExperimentConfig {
    /// Reads the config file (if any), applies flag overrides, fills
    /// per-command defaults and validates everything before any work starts.
    pub fn resolve(command: CommandKind, flags: Options) -> Result<Self, CliError> {
        let opts = match &flags.config {
            Some(path) => {
                let file = Options::from_file(path)?;
                flags.merge_over(file)
            }
            None => flags,
        };
        use CommandKind::*;
        let dim = opts.dim.unwrap_or(match command {
            SimulateFbm => 1,
            Verify => 3,
            _ => 2,
        });
        if dim == 0 || dim > occulab_core::rng::MAX_LANES as usize {
            return input(format!("--dim must be in 1..={}, got {dim}", occulab_core::rng::MAX_LANES));
        }
        let critical = opts.critical.unwrap_or(command.is_critical());
        let critical_h = 1.0 / dim as f64;
        // H = 1 is not a valid index, so one-dimensional runs default to Brownian motion
        let hurst = opts.hurst.unwrap_or(if dim > 1 { critical_h } else { 0.5 });
        if !(hurst > 0.0 && hurst < 1.0) {
            return input(format!("--hurst must lie in (0, 1), got {hurst}"));
        }
        if (critical || command.is_critical()) && (hurst * dim as f64 - 1.0).abs() > 1e-12 {
            return input(format!(
                "critical runs need hurst * dim = 1; got hurst {hurst} with dim {dim} (use --hurst {critical_h})"
            ));
        }
        let default_function = if command == FirstOrder { "gauss" } else { "gaussdiff:sigma=2" };
        let function_text = opts.function.clone().unwrap_or_else(|| default_function.to_string());
        let function = TestFunction::parse(&function_text, dim).map_err(|e| CliError::Input(format!("--function: {e}")))?;
        let n_list = opts.n_list.clone().unwrap_or_else(|| match command {
            FirstOrder => vec![6.0, 12.0],
            Fdd => vec![8.0],
            _ => vec![6.0, 9.0, 12.0],
        });
        let t_list = opts.t_list.clone().unwrap_or_else(|| match command {
            FirstOrder => vec![1.0, 2.0],
            Zprocess => vec![0.5, 1.0, 2.0],
            _ => vec![1.0],
        });
        if n_list.is_empty() || n_list.iter().any(|n| !(n.is_finite() && *n > 0.0)) {
            return input("--n-list must be a nonempty list of positive numbers");
        }
        if t_list.is_empty() || t_list.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return input("--t-list must be a nonempty list of positive numbers");
        }
        let replicas = opts.replicas.unwrap_or(match command {
            SimulateFbm => 1,
            Zprocess => 2000,
            _ => 4000,
        });
        if command.is_critical() && replicas < occulab_core::limitlab::MIN_REPLICAS {
            return input(format!("--replicas must be at least {}", occulab_core::limitlab::MIN_REPLICAS));
        }
        if replicas == 0 || (command == Zprocess && replicas < 2) {
            return input("--replicas is too small for this command");
        }
        let spacing = opts.spacing.unwrap_or(if command == SimulateFbm { 1.0 } else { 0.5 });
        if !(spacing.is_finite() && spacing > 0.0) {
            return input(format!("--spacing must be positive, got {spacing}"));
        }
        let seed = match opts.seed {
            Some(s) => s,
            None => env_seed()?.unwrap_or(DEFAULT_SEED),
        };
        let workers = opts.workers.unwrap_or(1);
        if workers == 0 {
            return input("--workers must be at least 1");
        }
        let engine: PathEngine = opts
            .engine
            .as_deref()
            .unwrap_or("auto")
            .parse()
            .map_err(|e| CliError::Input(format!("--engine: {e}")))?;
        if engine == PathEngine::Bridge && hurst != 0.5 {
            return input("--engine bridge needs dim 2 (H = 1/2)");
        }
        let intervals = opts.intervals.clone().unwrap_or_else(|| vec![(0.0, 1.0), (1.0, 2.0)]);
        for (i, &(a, b)) in intervals.iter().enumerate() {
            if !(a >= 0.0 && b > a && b.is_finite()) || (i > 0 && intervals[i - 1].1 > a) {
                return input("--intervals must be disjoint ascending intervals a:b with 0 <= a < b");
            }
        }
        let walk_steps = opts.walk_steps.unwrap_or(1_000_000);
        if walk_steps < occulab_core::limitlab::MIN_WALK_STEPS {
            return input(format!("--walk-steps must be at least {}", occulab_core::limitlab::MIN_WALK_STEPS));
        }
        let steps = opts.steps.unwrap_or(1024);
        if steps == 0 {
            return input("--steps must be positive");
        }
        let trials = opts.trials.unwrap_or(1_000_000);
        let lnd_trials = opts.lnd_trials.unwrap_or(100_000);
        if trials == 0 || lnd_trials == 0 {
            return input("trial counts must be positive");
        }
        Ok(Self {
            command,
            dim,
            hurst,
            critical,
            function,
            n_list,
            t_list,
            replicas,
            spacing,
            seed,
            output_dir: opts.output_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
            workers,
            engine,
            intervals,
            walk_steps,
            check: opts.check.unwrap_or(CheckKind::All),
            trials,
            lnd_trials,
            steps,
            sampler: opts.sampler.unwrap_or(SamplerKind::Circulant),
        })
    }
}
