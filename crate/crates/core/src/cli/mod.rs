//! Experiment harness behind the `netupdate` binary.
//!
//! Every command reads one JSON [`ExperimentConfig`] and writes CSV files
//! whose first line is a `# config_hash=... seeds=...` comment followed by
//! a header row. Sweep points and seeds run in parallel; results are
//! gathered in grid order before anything is written, so outputs are
//! byte-identical across invocations.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use commands::{
    analyze_trace, plan, plan_rows, points, run_point, simulate, sweep, sweep_rows, PlanRow, SweepRow,
};
pub use config::{
    Axis, DelaySpec, EntrySpec, ExperimentConfig, FlowSpec, GridValue, Prepared, ProcedureSpec,
    ScheduleMode, SweepSpec, TopologySpec, UpdateSpec, DEFAULT_RATE_PPS,
};

/// Exit status for a configuration or input error.
pub const EXIT_CONFIG: u8 = 2;
/// Exit status for a violated internal invariant.
pub const EXIT_INTERNAL: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CliError {
    #[error("invalid `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl CliError {
    pub fn config(field: &str, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    pub fn internal(reason: impl Into<String>) -> Self {
        CliError::Internal(reason.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "netupdate", version, about = "Plan and simulate timed and untimed network updates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Args, Debug, Clone)]
pub struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Seeds, e.g. `1,2,3` or `0..50`; overrides the config.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Sweep axis: n, delta, dc, dn or d; overrides the config.
    #[arg(long)]
    pub axis: Option<String>,
    /// Comma-separated sweep values such as `6,12,24` or `0ms,2ms`.
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Worst-case durations, timed and untimed, per sweep point.
    Plan(Common),
    /// One run: run.json, inconsistency.csv, faults.csv and messages.log.
    Simulate(Common),
    /// Simulated durations and inconsistency aggregated over seeds.
    Sweep(Common),
    /// Percentiles and tail ratios of a delay trace.
    AnalyzeTrace {
        /// Trace file: one millisecond value per line.
        path: PathBuf,
        /// Comma-separated percentiles in (0, 1].
        #[arg(long, default_value = "0.999,0.9999,0.99999")]
        percentiles: String,
        /// Output directory; the table goes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A loaded configuration with command-line overrides applied.
pub struct Loaded {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
    pub out: PathBuf,
}

impl Loaded {
    pub fn from_args(args: &Common) -> Result<Loaded, CliError> {
        let text = std::fs::read_to_string(&args.config).map_err(|e| {
            CliError::config("--config", format!("{}: {e}", args.config.display()))
        })?;
        let mut config = ExperimentConfig::parse(&text)?;
        if let Some(seeds) = &args.seeds {
            config.seeds = parse_seeds(seeds)?;
        }
        match (&args.axis, &args.grid) {
            (Some(axis), Some(grid)) => {
                config.sweep = Some(SweepSpec {
                    axis: axis.parse()?,
                    grid: GridValue::parse_list(grid),
                })
            }
            (Some(axis), None) => {
                let grid = config
                    .sweep
                    .as_ref()
                    .map(|s| s.grid.clone())
                    .ok_or_else(|| CliError::config("--grid", "required with --axis"))?;
                config.sweep = Some(SweepSpec {
                    axis: axis.parse()?,
                    grid,
                });
            }
            (None, Some(grid)) => {
                let sweep = config
                    .sweep
                    .as_mut()
                    .ok_or_else(|| CliError::config("--axis", "required with --grid"))?;
                sweep.grid = GridValue::parse_list(grid);
            }
            (None, None) => {}
        }
        if config.seeds.is_empty() {
            config.seeds = vec![0];
        }
        let base_dir = args
            .config
            .parent()
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Loaded {
            config,
            base_dir,
            out: args.out.clone(),
        })
    }
}

/// `1,2,5`, `0..50` (exclusive) or `0..=49`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::config("--seeds", format!("cannot parse `{text}`"));
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..") {
        let (b, inclusive) = match b.strip_prefix('=') {
            Some(b) => (b, true),
            None => (b, false),
        };
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        let seeds: Vec<u64> = if inclusive { (a..=b).collect() } else { (a..b).collect() };
        return if seeds.is_empty() { Err(bad()) } else { Ok(seeds) };
    }
    let seeds = text
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect::<Result<Vec<u64>, _>>()?;
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

/// Parses the process arguments, runs the command and maps errors to exit
/// codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("netupdate: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Plan(args) => plan(&Loaded::from_args(args)?),
        Command::Simulate(args) => simulate(&Loaded::from_args(args)?),
        Command::Sweep(args) => sweep(&Loaded::from_args(args)?),
        Command::AnalyzeTrace {
            path,
            percentiles,
            out,
        } => analyze_trace(path, percentiles, out.as_deref()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("1,2,5").unwrap(), vec![1, 2, 5]);
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("2..=3").unwrap(), vec![2, 3]);
        assert!(parse_seeds("x").is_err());
        assert!(parse_seeds("3..3").is_err());
    }
}
