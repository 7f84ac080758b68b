use std::path::{Path, PathBuf};

use chainpulse::explore::{
    acf, ecdf, fit_exponential, fit_interblock_exponential, fit_poisson_slots, histogram, pacf, poisson_consistency, AcfResult,
    PoissonFit, BYTES_PER_MB,
};
use chainpulse::ingest::filter_day_class;
use chainpulse::{BlockSeries, DayClass};
use clap::{Args, ValueEnum};
use statrs::distribution::{ContinuousCDF, Discrete, Normal, Poisson};

use super::{csv_bytes, load_blocks, parse_list, require};
use crate::commands::report::{load_txs, miner_counts_table, miner_table, quartile_table};
use crate::error::{CliError, CliResult};
use crate::output::Outputs;
use crate::plot::{render_plot, Labels, PlotKind, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stat {
    Ecdf,
    InterblockFit,
    Acf,
    Pacf,
    Poisson,
    Miners,
    MinerSummary,
    FeeQuartiles,
    Histogram,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Attr {
    Size,
    TxCount,
    AvgFee,
    Interblock,
}

impl Attr {
    fn name(self) -> &'static str {
        match self {
            Attr::Size => "size",
            Attr::TxCount => "tx_count",
            Attr::AvgFee => "avg_fee",
            Attr::Interblock => "interblock",
        }
    }

    fn axis(self) -> &'static str {
        match self {
            Attr::Size => "block size (MB)",
            Attr::TxCount => "transactions per block (count)",
            Attr::AvgFee => "average fee (BTC per tx)",
            Attr::Interblock => "inter-block time (s)",
        }
    }

    fn values(self, s: &BlockSeries) -> Vec<f64> {
        match self {
            Attr::Size => s.sizes().iter().map(|v| v / BYTES_PER_MB).collect(),
            Attr::TxCount => s.tx_counts(),
            Attr::AvgFee => s.avg_fees(),
            Attr::Interblock => s.interblock().iter().map(|&g| g as f64).collect(),
        }
    }
}

#[derive(Debug, Args)]
pub struct ExploreArgs {
    /// Block CSV.
    #[arg(long = "in", value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Transaction CSV (for fee-quartiles).
    #[arg(long, value_name = "FILE")]
    pub txs: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub stat: Stat,
    #[arg(long, value_enum, default_value = "size")]
    pub attr: Attr,
    /// Keep only blocks from working days or weekend days.
    #[arg(long)]
    pub day_class: Option<DayClass>,
    #[arg(long, default_value_t = 40)]
    pub max_lag: usize,
    /// Poisson slot lengths in minutes; each is compared against the first.
    #[arg(long, default_value = "100,1000")]
    pub slot: String,
    /// Largest |ratio - 1| still called consistent with a Poisson process.
    #[arg(long, default_value_t = 0.05)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Largest number of steps drawn in an ECDF plot; the CSV is never thinned.
const MAX_PLOT_STEPS: usize = 2000;

fn g(v: f64) -> String {
    v.to_string()
}

fn stem(a: &ExploreArgs, stat: &str, attr: Option<Attr>) -> String {
    let mut s = stat.to_string();
    if let Some(at) = attr {
        s.push('_');
        s.push_str(at.name());
    }
    if let Some(dc) = a.day_class {
        s.push('_');
        s.push_str(dc.as_str());
    }
    s
}

fn emit(outputs: &mut Outputs, dir: &Path, stem: &str, table: &Table, kind: Option<(PlotKind, Labels)>) -> CliResult<()> {
    outputs.add(dir.join(format!("{stem}.csv")), table.to_csv());
    if let Some((kind, labels)) = kind {
        outputs.add(dir.join(format!("{stem}.svg")), render_plot(table, kind, &labels)?);
    }
    Ok(())
}

fn thin(table: &Table, max: usize) -> Table {
    let n = table.rows.len();
    if n <= max {
        return table.clone();
    }
    // evenly spaced rows, always keeping the last (probability 1)
    let rows = (0..max).map(|i| table.rows[(i + 1) * n / max - 1].clone()).collect();
    Table { columns: table.columns.clone(), rows }
}

fn correlogram(r: &AcfResult) -> Table {
    let rows = r.values.iter().enumerate().map(|(k, v)| vec![k as f64, *v, r.confidence_band]).collect();
    Table::new(&["lag", "value", "band"], rows)
}

/// Histogram with a fitted curve: exponential for inter-block times, normal otherwise.
fn histogram_with_fit(values: &[f64], bins: usize, attr: Attr) -> CliResult<Table> {
    let h = histogram(values, bins)?;
    let n = values.len() as f64;
    let cdf: Box<dyn Fn(f64) -> f64> = if attr == Attr::Interblock {
        let positive: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0).collect();
        let fit = fit_exponential(&positive)?;
        Box::new(move |x| fit.cdf(x))
    } else {
        let m = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
        match Normal::new(m, sd) {
            Ok(d) => Box::new(move |x| d.cdf(x)),
            Err(_) => Box::new(move |x| if x >= m { 1.0 } else { 0.0 }),
        }
    };
    let rows = h.iter().map(|&(lo, hi, c)| vec![lo, hi, c as f64, n * (cdf(hi) - cdf(lo))]).collect();
    Ok(Table::new(&["lo", "hi", "count", "fit"], rows))
}

fn poisson_histogram(fit: &PoissonFit) -> Table {
    let lo = fit.counts.iter().copied().min().unwrap_or(0);
    let hi = fit.counts.iter().copied().max().unwrap_or(0);
    let pmf = Poisson::new(fit.intensity.max(f64::MIN_POSITIVE)).ok();
    let rows = (lo..=hi)
        .map(|k| {
            let observed = fit.counts.iter().filter(|&&c| c == k).count() as f64;
            let expected = pmf.as_ref().map_or(0.0, |d| fit.n_slots as f64 * d.pmf(k));
            vec![k as f64 - 0.5, k as f64 + 0.5, observed, expected]
        })
        .collect();
    Table::new(&["lo", "hi", "count", "fit"], rows)
}

fn poisson(a: &ExploreArgs, series: &BlockSeries, outputs: &mut Outputs) -> CliResult<()> {
    let minutes = parse_list(&a.slot).map_err(|e| CliError::usage(format!("--slot: {e}")))?;
    if minutes.len() < 2 {
        return Err(CliError::usage("--slot needs at least two slot lengths"));
    }
    let ts: Vec<f64> = series.timestamps().iter().map(|&t| t as f64).collect();
    let fits: Vec<PoissonFit> = minutes.iter().map(|m| fit_poisson_slots(&ts, m * 60.0)).collect::<Result<_, _>>()?;
    let mut slot_rows = Vec::new();
    let mut check_rows = Vec::new();
    for (m, fit) in minutes.iter().zip(&fits) {
        slot_rows.push(vec![g(*m), g(fit.slot_len), fit.n_slots.to_string(), g(fit.intensity)]);
        if !std::ptr::eq(fit, &fits[0]) {
            let (ratio, verdict) = poisson_consistency(&fits[0], fit, a.tolerance)?;
            check_rows.push(vec![g(minutes[0]), g(*m), g(ratio), format!("{verdict:?}")]);
            outputs.note(format!("{}-min vs {}-min intensity ratio {ratio:.4}: {verdict:?}", minutes[0], m));
        }
        let name = format!("{}_{}min", stem(a, "poisson", None), m);
        let labels = Labels::new(&format!("Blocks per {m}-minute slot"), "blocks per slot (count)", "slots (count)");
        emit(outputs, &a.out, &name, &poisson_histogram(fit), Some((PlotKind::HistogramFit, labels)))?;
    }
    let dir = &a.out;
    outputs.add(dir.join(format!("{}.csv", stem(a, "poisson", None))), csv_bytes(&["slot_min", "slot_s", "n_slots", "intensity"], &slot_rows));
    outputs.add(dir.join(format!("{}_check.csv", stem(a, "poisson", None))), csv_bytes(&["slot_a_min", "slot_b_min", "ratio", "verdict"], &check_rows));
    Ok(())
}

pub fn run(a: ExploreArgs) -> CliResult<Outputs> {
    let mut outputs = Outputs::new();
    if a.stat == Stat::FeeQuartiles {
        let p = require(a.txs.as_ref(), "--txs", "for fee-quartiles")?;
        let txs = load_txs(p, &mut outputs)?;
        outputs.add(a.out.join("fee_quartiles.csv"), quartile_table(&txs)?);
        return Ok(outputs);
    }
    let input = require(a.input.as_ref(), "--in", "for block statistics")?;
    let mut series = load_blocks(input, &mut outputs)?;
    if let Some(dc) = a.day_class {
        series = filter_day_class(&series, dc);
    }
    let day = a.day_class.map(|d| format!(" ({d} days)")).unwrap_or_default();
    let out = a.out.clone();
    match a.stat {
        Stat::Ecdf => {
            let e = ecdf(&a.attr.values(&series))?;
            let t = Table::new(&["value", "prob"], e.values.iter().zip(&e.probs).map(|(v, p)| vec![*v, *p]).collect());
            let labels = Labels::new(&format!("Empirical CDF of {}{day}", a.attr.name()), a.attr.axis(), "cumulative probability (fraction)");
            outputs.add(out.join(format!("{}.csv", stem(&a, "ecdf", Some(a.attr)))), t.to_csv());
            outputs.add(out.join(format!("{}.svg", stem(&a, "ecdf", Some(a.attr)))), render_plot(&thin(&t, MAX_PLOT_STEPS), PlotKind::Ecdf, &labels)?);
        }
        Stat::InterblockFit => {
            let fit = fit_interblock_exponential(series.interblock())?;
            let rows = vec![vec![g(fit.fit.rate), g(fit.fit.mean()), g(fit.fit.ks_stat), fit.fit.n.to_string(), fit.excluded.to_string()]];
            outputs.add(out.join(format!("{}.csv", stem(&a, "interblock_fit", None))), csv_bytes(&["rate_per_s", "mean_s", "ks_stat", "n", "excluded"], &rows));
            outputs.note(format!("exponential mean {:.3} s, KS distance {:.5}", fit.fit.mean(), fit.fit.ks_stat));
            let t = histogram_with_fit(&Attr::Interblock.values(&series), a.bins, Attr::Interblock)?;
            let labels = Labels::new(&format!("Inter-block times{day}"), Attr::Interblock.axis(), "blocks (count)");
            emit(&mut outputs, &out, &stem(&a, "interblock_hist", None), &t, Some((PlotKind::HistogramFit, labels)))?;
        }
        Stat::Acf | Stat::Pacf => {
            let v = a.attr.values(&series);
            let (name, r) = if a.stat == Stat::Acf { ("acf", acf(&v, a.max_lag)?) } else { ("pacf", pacf(&v, a.max_lag)?) };
            let labels = Labels::new(&format!("{} of {}{day}", name.to_uppercase(), a.attr.name()), "lag (blocks)", "correlation (unitless)");
            emit(&mut outputs, &out, &stem(&a, name, Some(a.attr)), &correlogram(&r), Some((PlotKind::Acf, labels)))?;
        }
        Stat::Poisson => poisson(&a, &series, &mut outputs)?,
        Stat::Miners => outputs.add(out.join(format!("{}.csv", stem(&a, "miners", None))), miner_counts_table(&series)),
        Stat::MinerSummary => outputs.add(out.join(format!("{}.csv", stem(&a, "miner_summary", None))), miner_table(&series)?),
        Stat::Histogram => {
            let t = histogram_with_fit(&a.attr.values(&series), a.bins, a.attr)?;
            let labels = Labels::new(&format!("Distribution of {}{day}", a.attr.name()), a.attr.axis(), "blocks (count)");
            emit(&mut outputs, &out, &stem(&a, "histogram", Some(a.attr)), &t, Some((PlotKind::HistogramFit, labels)))?;
        }
        Stat::FeeQuartiles => unreachable!("handled above"),
    }
    Ok(outputs)
}
