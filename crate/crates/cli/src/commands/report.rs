use std::path::PathBuf;

use chainpulse::explore::{confirmation_by_fee_quartile, miner_block_counts_by_day_class, summary_by_miner};
use chainpulse::ingest::{filter_day_class, load_tx_csv, SplitSpec};
use chainpulse::{BlockSeries, DayClass, TxRecord};
use clap::Args;

use super::{csv_bytes, load_blocks, parse_split};
use crate::error::CliResult;
use crate::output::Outputs;

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Block CSV.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Transaction CSV; adds the fee-quartile table.
    #[arg(long, value_name = "FILE")]
    pub txs: Option<PathBuf>,
    /// Train/test/validation fractions for the dataset-division table.
    #[arg(long, value_parser = parse_split, default_value = "0.7,0.15,0.15")]
    pub split: SplitSpec,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn f(v: f64) -> String {
    v.to_string()
}

/// Per-miner mean, standard deviation, minimum and maximum of size (MB),
/// transaction count and average fee (BTC).
pub(crate) fn miner_table(series: &BlockSeries) -> CliResult<Vec<u8>> {
    let header = [
        "miner", "blocks", "mean_s", "mean_n", "mean_f", "sd_s", "sd_n", "sd_f", "min_s", "min_n", "min_f", "max_s", "max_n", "max_f",
    ];
    let rows: Vec<Vec<String>> = summary_by_miner(series)?
        .into_iter()
        .map(|m| {
            let mut r = vec![m.miner, m.blocks.to_string()];
            let stats = [m.size_mb, m.tx_count, m.avg_fee];
            r.extend(stats.iter().map(|s| f(s.mean)));
            r.extend(stats.iter().map(|s| f(s.sd)));
            r.extend(stats.iter().map(|s| f(s.min)));
            r.extend(stats.iter().map(|s| f(s.max)));
            r
        })
        .collect();
    Ok(csv_bytes(&header, &rows))
}

/// Training/test/validation row counts per day class and overall.
pub(crate) fn division_table(series: &BlockSeries, spec: &SplitSpec) -> Vec<u8> {
    let parts = [
        ("Working_day", filter_day_class(series, DayClass::Working).len()),
        ("Weekend_day", filter_day_class(series, DayClass::Weekend).len()),
        ("All_db", series.len()),
    ];
    let rows: Vec<Vec<String>> = parts
        .iter()
        .map(|(name, m)| {
            let (tr, te, va) = spec.counts(*m);
            vec![name.to_string(), tr.to_string(), te.to_string(), va.to_string(), m.to_string()]
        })
        .collect();
    csv_bytes(&["dataset", "training", "test", "validation", "blocks"], &rows)
}

/// Block counts per miner, split by day class.
pub(crate) fn miner_counts_table(series: &BlockSeries) -> Vec<u8> {
    let by_class = miner_block_counts_by_day_class(series);
    let mut miners: Vec<(String, usize, usize)> = Vec::new();
    for ((miner, class), n) in by_class {
        if miners.last().map(|m| &m.0) != Some(&miner) {
            miners.push((miner, 0, 0));
        }
        let last = miners.last_mut().expect("pushed above");
        match class {
            DayClass::Working => last.1 += n,
            DayClass::Weekend => last.2 += n,
        }
    }
    miners.sort_by(|a, b| (b.1 + b.2).cmp(&(a.1 + a.2)).then_with(|| a.0.cmp(&b.0)));
    let total = series.len().max(1) as f64;
    let rows: Vec<Vec<String>> = miners
        .into_iter()
        .map(|(m, wk, we)| vec![m, (wk + we).to_string(), wk.to_string(), we.to_string(), f((wk + we) as f64 / total)])
        .collect();
    csv_bytes(&["miner", "blocks", "working", "weekend", "share"], &rows)
}

/// Confirmation time per fee quartile (seconds), low fees first.
pub(crate) fn quartile_table(txs: &[TxRecord]) -> CliResult<Vec<u8>> {
    let q = confirmation_by_fee_quartile(txs)?;
    if q.degenerate {
        log::warn!("fee quartile breakpoints coincide; some buckets are empty");
    }
    let edges = [0.0, q.breakpoints[0], q.breakpoints[1], q.breakpoints[2], f64::INFINITY];
    let opt = |v: Option<f64>| v.map(f).unwrap_or_default();
    let mut rows: Vec<Vec<String>> = q
        .buckets
        .iter()
        .enumerate()
        .map(|(i, b)| vec![format!("Q{}", i + 1), f(edges[i]), f(edges[i + 1]), b.count.to_string(), opt(b.mean_wait), opt(b.median_wait)])
        .collect();
    rows.push(vec!["all".into(), String::new(), String::new(), q.total.to_string(), f(q.overall_mean), String::new()]);
    Ok(csv_bytes(&["quartile", "fee_lo_btc", "fee_hi_btc", "count", "mean_wait_s", "median_wait_s"], &rows))
}

pub(crate) fn load_txs(path: &PathBuf, outputs: &mut Outputs) -> CliResult<Vec<TxRecord>> {
    outputs.input(path);
    let loaded = load_tx_csv(path)?;
    for m in &loaded.report.messages {
        log::warn!("{}: {m}", path.display());
    }
    Ok(loaded.txs)
}

pub fn run(a: ReportArgs) -> CliResult<Outputs> {
    let mut outputs = Outputs::new();
    let series = load_blocks(&a.input, &mut outputs)?;
    outputs.add(a.out.join("table1_miners.csv"), miner_table(&series)?);
    outputs.add(a.out.join("table2_division.csv"), division_table(&series, &a.split));
    outputs.add(a.out.join("miner_counts.csv"), miner_counts_table(&series));
    if let Some(p) = &a.txs {
        let txs = load_txs(p, &mut outputs)?;
        outputs.add(a.out.join("fee_quartiles.csv"), quartile_table(&txs)?);
    }
    Ok(outputs)
}
