use std::path::PathBuf;
use std::time::Duration;

use chainpulse::ingest::{block_csv_bytes, collect_from_node, filter_day_class, split_dataset, NodeEndpoint, SplitSpec};
use chainpulse::{BlockSeries, DayClass};
use clap::Args;

use super::{load_blocks, parse_split};
use crate::error::{CliError, CliResult};
use crate::output::Outputs;

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Block CSV to validate.
    #[arg(long = "in", value_name = "FILE", conflicts_with = "rpc_url", required_unless_present = "rpc_url")]
    pub input: Option<PathBuf>,
    /// Collect from a node instead; credentials come from CHAINPULSE_RPC_USER / CHAINPULSE_RPC_PASS.
    #[arg(long, value_name = "URL", requires_all = ["from", "to"])]
    pub rpc_url: Option<String>,
    /// First height to collect.
    #[arg(long)]
    pub from: Option<u64>,
    /// Last height to collect (inclusive).
    #[arg(long)]
    pub to: Option<u64>,
    /// Base retry delay for node requests, in milliseconds.
    #[arg(long, default_value_t = 1000)]
    pub poll_ms: u64,
    /// Keep only blocks from working days or weekend days.
    #[arg(long)]
    pub day_class: Option<DayClass>,
    /// Chronological train/test/validation fractions, e.g. `0.7,0.15,0.15`.
    #[arg(long, value_parser = parse_split)]
    pub split: Option<SplitSpec>,
    /// Output CSV, or the directory for train/test/val.csv with --split.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn acquire(a: &IngestArgs, outputs: &mut Outputs) -> CliResult<BlockSeries> {
    if let Some(path) = &a.input {
        return load_blocks(path, outputs);
    }
    let url = a.rpc_url.as_deref().ok_or_else(|| CliError::usage("either --in or --rpc-url is required"))?;
    let (from, to) = (a.from.unwrap_or(0), a.to.unwrap_or(0));
    let ep = NodeEndpoint::from_env(url, Duration::from_millis(a.poll_ms))?;
    let outcome = collect_from_node(&ep, from..=to)?;
    outputs.note(format!("collected {} blocks with {} retries", outcome.series.len(), outcome.retries));
    if let Some(e) = outcome.aborted {
        let fetched = outcome.series.len();
        outputs.fail_after_publish(CliError::from(e).context(&format!("collection stopped after {fetched} blocks")));
    }
    Ok(outcome.series)
}

pub fn run(a: IngestArgs) -> CliResult<Outputs> {
    let mut outputs = Outputs::new();
    let mut series = acquire(&a, &mut outputs)?;
    if let Some(class) = a.day_class {
        series = filter_day_class(&series, class);
    }
    outputs.note(format!("blocks: {}", series.len()));
    match (&a.split, &a.out) {
        (Some(spec), out) => {
            let dir = out.clone().ok_or_else(|| CliError::usage("--split needs --out DIR"))?;
            let (train, test, val) = split_dataset(&series, spec)?;
            outputs.note(format!("train: {}, test: {}, val: {}", train.len(), test.len(), val.len()));
            for (name, part) in [("train.csv", train), ("test.csv", test), ("val.csv", val)] {
                outputs.add(dir.join(name), block_csv_bytes(&part));
            }
        }
        (None, Some(out)) => outputs.add(out.clone(), block_csv_bytes(&series)),
        (None, None) => {}
    }
    Ok(outputs)
}
