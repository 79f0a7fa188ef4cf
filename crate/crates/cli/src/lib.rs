//! Experiment driver for `occulab`: configuration, scheduling on a worker
//! pool, and persistence of `results.csv`, `summary.json` and
//! `manifest.json`.
//!
//! Exit codes: 0 when every acceptance band passes, 1 when a band fails,
//! 2 on invalid input or any other error.

pub mod config;
pub mod experiments;
pub mod output;

use std::process::ExitCode;

use clap::Parser;

pub use config::{Cli, CommandKind, ExperimentConfig, Options};
pub use output::{Band, ResultRow, Summary};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] occulab_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_BAND_FAILURE: u8 = 1;
pub const EXIT_ERROR: u8 = 2;

/// Outcome of a completed run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: Summary,
    pub stdout: Option<String>,
}

impl RunReport {
    pub fn exit_code(&self) -> u8 {
        if self.summary.passed {
            EXIT_OK
        } else {
            EXIT_BAND_FAILURE
        }
    }
}

/// Runs one experiment on a pool of `config.workers` threads and writes its
/// output files.
pub fn execute(config: &ExperimentConfig) -> Result<RunReport, CliError> {
    let started = chrono::Utc::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(config.workers).build()?;
    let outcome = pool.install(|| experiments::run(config))?;
    let summary = Summary {
        experiment: config.command.name().to_string(),
        passed: outcome.bands.iter().all(|b| b.pass),
        bands: outcome.bands,
        details: outcome.details,
    };
    let mut summary_json = serde_json::to_vec_pretty(&summary)?;
    summary_json.push(b'\n');
    let mut files = vec![
        (output::RESULTS_FILE.to_string(), output::render_csv(&outcome.rows).into_bytes()),
        (output::SUMMARY_FILE.to_string(), summary_json),
    ];
    files.extend(outcome.extra_files);
    output::persist(config, &files, started)?;
    Ok(RunReport { summary, stdout: outcome.stdout })
}

/// Parses arguments, runs, prints, and maps the result to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { EXIT_OK });
        }
    };
    let (kind, opts) = cli.command.split();
    let result = ExperimentConfig::resolve(kind, opts).and_then(|cfg| execute(&cfg));
    match result {
        Ok(report) => {
            if let Some(text) = &report.stdout {
                println!("{text}");
            }
            for band in report.summary.bands.iter().filter(|b| !b.pass) {
                eprintln!("band failed: {} = {} (required {})", band.name, band.value, band.requirement);
            }
            ExitCode::from(report.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
