//! Configuration, execution and reporting behind the `tseba` binary.

pub mod config;
pub mod report;
pub mod run;

use std::io;

use thiserror::Error;

pub use config::{parse_config, parse_config_for, Command, ConfigError, Format, Job, Overrides, RunConfig};
pub use report::{emit, fmt_num, parse_scan_csv, KlRow, Report, Table};
pub use run::execute;

/// Environment variable holding the number of rayon workers.
pub const WORKERS_ENV: &str = "TSEBA_WORKERS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{0}")]
    Runtime(#[from] tseba_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    /// 2 for configuration problems, 3 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::Io(_) => 3,
        }
    }
}

/// Parses a worker-count value; `None` means rayon's default.
pub fn parse_workers(value: Option<&str>) -> Result<Option<usize>, ConfigError> {
    let Some(v) = value else { return Ok(None) };
    match v.trim().parse::<usize>() {
        Ok(n) if n >= 1 => Ok(Some(n)),
        _ => Err(ConfigError::Field {
            field: WORKERS_ENV.into(),
            message: format!("expected a positive integer, got {v:?}"),
        }),
    }
}

/// Parses `text`, applies overrides, runs on `workers` threads and writes the
/// report.
pub fn run_document(
    text: &str,
    command: Command,
    overrides: &Overrides,
    workers: Option<usize>,
) -> Result<RunConfig, CliError> {
    let cfg = parse_config_for(text, Some(command))?.apply(overrides)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| io::Error::other(e.to_string()))?;
    let report = pool.install(|| execute(&cfg))?;
    emit(&report, cfg.format, cfg.output.as_deref())?;
    Ok(cfg)
}
