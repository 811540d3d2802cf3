//! Command-line front end: `penflow <solve|mc|figures|selfcheck>`.
//!
//! Exit codes are 0 on success, 1 for invalid input, 2 for solver or
//! self-check failures and 3 for I/O errors. Failures are also written to
//! stderr as a single JSON record.

mod commands;
mod config;
mod csv;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{band_table, run_command, trace_table, undersupply_table, CliError, Command, Report};
pub use config::{
    parse_config, parse_with_overrides, ConfigDoc, ConfigError, ParsedConfig, Provenance, RunConfig, REQUIRED_KEYS,
};
pub use csv::{format_float, write_csv, Cell, CsvTable};

/// The case-study configuration, used when `--config` is omitted.
pub const DEFAULT_CONFIG: &str = include_str!("../../configs/case_study.json");

#[derive(Debug, Parser)]
#[command(name = "penflow", version, about = "Optimal inflow control under stochastic demand")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Solve CM1 and CM2 (on the display path) and write the trace tables.
    Solve(Common),
    /// Run the Monte Carlo study for CM1 and CM2.
    Mc(Common),
    /// Run alpha in {1, 3} x {CM1, CM2} and write all figure tables.
    Figures(Common),
    /// Run the built-in oracle cross-checks.
    Selfcheck(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration; defaults to the built-in case study.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte Carlo seed (overrides `montecarlo.seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted-key override such as `penalty.alpha=3`; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn load(common: &Common) -> Result<ParsedConfig, CliError> {
    let text = match &common.config {
        Some(path) => std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?,
        None => DEFAULT_CONFIG.to_string(),
    };
    let mut overrides = common.overrides.clone();
    if let Some(seed) = common.seed {
        overrides.push(format!("montecarlo.seed={seed}"));
    }
    let mut parsed = parse_with_overrides(&text, &overrides)?;
    if let Some(out) = &common.out {
        parsed.config.doc.output.dir = out.clone();
    }
    Ok(parsed)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (cmd, common) = match cli.command {
        Cmd::Solve(c) => (Command::Solve, c),
        Cmd::Mc(c) => (Command::Mc, c),
        Cmd::Figures(c) => (Command::Figures, c),
        Cmd::Selfcheck(c) => (Command::Selfcheck, c),
    };
    let parsed = load(&common)?;
    for p in parsed.provenance.iter().filter(|p| p.defaulted) {
        println!("default {} = {}", p.key, p.value);
    }
    let report = run_command(cmd, &parsed.config)?;
    print!("{}", report.summary);
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

/// Runs the CLI on `args` and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.record());
            e.exit_code()
        }
    }
}
