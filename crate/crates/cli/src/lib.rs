//! `chainpulse` command-line front end.
//!
//! Every subcommand stages its output files in memory and publishes them at
//! the end with a temp-file-and-rename per file, so a failed run never
//! leaves half-written outputs behind. Errors print one line of the form
//! `error[<code>]: <message>`; usage errors exit with 2, all others with 1.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand};

pub use error::{CliError, CliResult, ErrorCode};
pub use plot::{render_plot, Labels, PlotKind, Table};

#[derive(Debug, Parser)]
#[command(name = "chainpulse", version, about = "Block and mempool analytics: simulate, ingest, explore, forecast, classify")]
pub struct Cli {
    /// Seed for every random choice; identical seeds give identical output bytes.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// INI file of flag defaults; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the mempool/mining simulator and write blocks.csv, txs.csv, truth.json.
    Simulate(commands::simulate::SimulateArgs),
    /// Validate, canonicalise, filter and split a block CSV, or collect one from a node.
    Ingest(commands::ingest::IngestArgs),
    /// Descriptive statistics as CSV tables plus SVG plots.
    Explore(commands::explore::ExploreArgs),
    /// Fit forecasters and tabulate rolling one-step MAE/RMSE.
    Forecast(commands::forecast::ForecastArgs),
    /// Train a miner classifier and evaluate it on a held-out split.
    Classify(commands::classify::ClassifyArgs),
    /// Dataset summary tables.
    Report(commands::report::ReportArgs),
}

fn command() -> clap::Command {
    Cli::command().args_override_self(true).mut_subcommands(|s| s.args_override_self(true))
}

fn parse(argv: Vec<OsString>) -> Result<Cli, clap::Error> {
    let matches: ArgMatches = command().try_get_matches_from(argv)?;
    Cli::from_arg_matches(&matches)
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().format_timestamp(None).try_init();
}

/// Runs one command; returns its report lines and the written paths.
pub fn execute(cli: Cli) -> CliResult<Vec<String>> {
    init_logging(cli.verbose);
    let seed = cli.seed;
    let outputs = match cli.command {
        Command::Simulate(a) => commands::simulate::run(a, seed)?,
        Command::Ingest(a) => commands::ingest::run(a)?,
        Command::Explore(a) => commands::explore::run(a)?,
        Command::Forecast(a) => commands::forecast::run(a, seed)?,
        Command::Classify(a) => commands::classify::run(a, seed)?,
        Command::Report(a) => commands::report::run(a)?,
    };
    outputs.publish()
}

fn first_line(e: &clap::Error) -> String {
    let text = e.render().to_string();
    let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
    line.trim_start_matches("error: ").to_string()
}

/// Full pipeline from raw arguments to exit status, with explicit streams.
pub fn run_with(argv: Vec<OsString>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let argv = match config::expand(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            return e.code.exit_status();
        }
    };
    let cli = match parse(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = write!(stdout, "{}", e.render());
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 2 } else { 0 };
            }
            let _ = writeln!(stderr, "{}", CliError::usage(first_line(&e)));
            return 2;
        }
    };
    match execute(cli) {
        Ok(lines) => {
            for l in lines {
                let _ = writeln!(stdout, "{l}");
            }
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            e.code.exit_status()
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv = args.into_iter().map(Into::into).collect();
    run_with(argv, &mut std::io::stdout(), &mut std::io::stderr())
}
