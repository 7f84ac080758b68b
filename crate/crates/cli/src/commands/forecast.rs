use std::path::PathBuf;
use std::thread;

use chainpulse::explore::BYTES_PER_MB;
use chainpulse::forecast::{
    evaluate_from, fit_ar, fit_arima, fit_arimax, naive_mean_baseline, train_nar, train_narx, AnyModel, ForecastError,
    ForecastEvaluation, ForecastTable, Scope, Target, TrainConfig,
};
use chainpulse::ingest::{filter_day_class, SplitSpec};
use chainpulse::{BlockSeries, DayClass};
use clap::{Args, ValueEnum};

use super::{load_blocks, parse_split, slug};
use crate::error::{CliError, CliResult};
use crate::output::Outputs;
use crate::plot::{render_plot, Labels, PlotKind, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum ModelChoice {
    Ar,
    Arima,
    Arimax,
    Nar,
    Narx,
    Mean,
    All,
}

impl ModelChoice {
    const EACH: [ModelChoice; 6] = [ModelChoice::Ar, ModelChoice::Arima, ModelChoice::Arimax, ModelChoice::Nar, ModelChoice::Narx, ModelChoice::Mean];

    pub fn label(self) -> &'static str {
        match self {
            ModelChoice::Ar => "AR",
            ModelChoice::Arima => "ARIMA",
            ModelChoice::Arimax => "ARIMAX",
            ModelChoice::Nar => "NAR",
            ModelChoice::Narx => "NARX",
            ModelChoice::Mean => "Mean",
            ModelChoice::All => "all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetChoice {
    Size,
    TxCount,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScopeChoice {
    Weekend,
    Working,
    All,
    Every,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    /// Block CSV.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Models to fit (comma-separated, or `all`).
    #[arg(long, visible_alias = "models", value_enum, value_delimiter = ',', default_value = "all")]
    pub model: Vec<ModelChoice>,
    /// Autoregressive order; also the tapped delay of NAR/NARX unless --delays is given.
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    #[arg(long, default_value_t = 0)]
    pub d: usize,
    #[arg(long, default_value_t = 2)]
    pub q: usize,
    #[arg(long)]
    pub delays: Option<usize>,
    #[arg(long, value_enum, default_value = "both")]
    pub target: TargetChoice,
    /// Day-class subset(s) to evaluate; `every` runs all three.
    #[arg(long, value_enum, default_value = "every")]
    pub scope: ScopeChoice,
    /// Hidden units of the neural models.
    #[arg(long, default_value_t = 10)]
    pub hidden: usize,
    /// Levenberg–Marquardt iterations for the neural models.
    #[arg(long, default_value_t = 100)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub weight_decay: f64,
    /// Chronological train/test/validation fractions; metrics are on the test part.
    #[arg(long, value_parser = parse_split, default_value = "0.7,0.15,0.15")]
    pub split: SplitSpec,
    /// Also write measured-vs-predicted tables and plots for the test span.
    #[arg(long)]
    pub plots: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

impl ForecastArgs {
    fn models(&self) -> Vec<ModelChoice> {
        let mut m: Vec<ModelChoice> = if self.model.contains(&ModelChoice::All) { ModelChoice::EACH.to_vec() } else { self.model.clone() };
        m.sort();
        m.dedup();
        m
    }

    fn targets(&self) -> Vec<Target> {
        match self.target {
            TargetChoice::Size => vec![Target::Size],
            TargetChoice::TxCount => vec![Target::TxCount],
            TargetChoice::Both => Target::ALL.to_vec(),
        }
    }

    fn scopes(&self) -> Vec<Scope> {
        match self.scope {
            ScopeChoice::Weekend => vec![Scope::Weekend],
            ScopeChoice::Working => vec![Scope::Working],
            ScopeChoice::All => vec![Scope::All],
            ScopeChoice::Every => Scope::ALL.to_vec(),
        }
    }
}

/// Target values and exogenous rows of one day-class subset.
pub struct Dataset {
    pub heights: Vec<u64>,
    /// Size in MB.
    pub size: Vec<f64>,
    pub tx_count: Vec<f64>,
    /// `(inter-block time s, average fee BTC, mempool MB)` observed with each block.
    pub exog: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(series: &BlockSeries) -> Self {
        let gaps = series.interblock();
        let exog = series
            .blocks()
            .iter()
            .enumerate()
            .map(|(i, b)| {
                // the first block has no predecessor; reuse the first gap
                let gap = if i == 0 { gaps.first().copied().unwrap_or(0) } else { gaps[i - 1] };
                vec![gap as f64, b.avg_fee.as_btc_f64(), b.mempool.total_bytes as f64 / BYTES_PER_MB]
            })
            .collect();
        Self {
            heights: series.blocks().iter().map(|b| b.height).collect(),
            size: series.sizes().iter().map(|s| s / BYTES_PER_MB).collect(),
            tx_count: series.tx_counts(),
            exog,
        }
    }

    fn target(&self, t: Target) -> &[f64] {
        match t {
            Target::Size => &self.size,
            Target::TxCount => &self.tx_count,
        }
    }
}

pub struct FitOutcome {
    pub model: AnyModel,
    pub eval: ForecastEvaluation,
}

#[derive(Debug, Clone)]
pub struct ModelParams {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub delays: usize,
    pub hidden: usize,
    pub train: TrainConfig,
}

/// Fits `choice` on the first `n_train` points and scores rolling one-step
/// predictions over `series[n_train..]`.
pub fn fit_and_evaluate(choice: ModelChoice, y: &[f64], exog: &[Vec<f64>], n_train: usize, params: &ModelParams) -> Result<FitOutcome, ForecastError> {
    let (ty, tx) = (&y[..n_train], &exog[..n_train]);
    let ModelParams { p, d, q, delays, hidden, .. } = *params;
    let cfg = &params.train;
    let model = match choice {
        ModelChoice::Ar => AnyModel::Arima(fit_ar(ty, p)?),
        ModelChoice::Arima => AnyModel::Arima(fit_arima(ty, p, d, q)?),
        ModelChoice::Arimax => AnyModel::Arima(fit_arimax(ty, tx, p, d, q)?),
        ModelChoice::Nar => AnyModel::Neural(train_nar(ty, delays, hidden, cfg)?),
        ModelChoice::Narx => AnyModel::Neural(train_narx(ty, tx, delays, hidden, cfg)?),
        ModelChoice::Mean | ModelChoice::All => AnyModel::Mean(naive_mean_baseline(ty)?),
    };
    let uses_exog = matches!(choice, ModelChoice::Arimax | ModelChoice::Narx);
    let eval = evaluate_from(&model, y, uses_exog.then_some(exog), n_train)?;
    Ok(FitOutcome { model, eval })
}

type Job = (Scope, Target);
type JobResult = (Job, Result<FitOutcome, ForecastError>);

pub fn run(a: ForecastArgs, seed: Option<u64>) -> CliResult<Outputs> {
    let mut outputs = Outputs::new();
    let series = load_blocks(&a.input, &mut outputs)?;
    let params = ModelParams {
        p: a.p,
        d: a.d,
        q: a.q,
        delays: a.delays.unwrap_or(a.p).max(1),
        hidden: a.hidden,
        train: TrainConfig { seed: seed.unwrap_or(0), max_iterations: a.iterations, weight_decay: a.weight_decay, evidence_updates: false },
    };
    let scopes = a.scopes();
    let data: Vec<(Scope, Dataset)> = scopes
        .iter()
        .map(|&s| {
            let subset = match s {
                Scope::Weekend => filter_day_class(&series, DayClass::Weekend),
                Scope::Working => filter_day_class(&series, DayClass::Working),
                Scope::All => series.clone(),
            };
            (s, Dataset::new(&subset))
        })
        .collect();
    let jobs: Vec<Job> = scopes.iter().flat_map(|&s| a.targets().into_iter().map(move |t| (s, t))).collect();
    let models = a.models();

    // one worker per model; nothing is published until every worker is done
    let results: Vec<(ModelChoice, Vec<JobResult>)> = thread::scope(|sc| {
        let handles: Vec<_> = models
            .iter()
            .map(|&m| {
                let (data, jobs, params, split) = (&data, &jobs, &params, &a.split);
                sc.spawn(move || {
                    let out = jobs
                        .iter()
                        .map(|&(scope, target)| {
                            let ds = &data.iter().find(|(s, _)| *s == scope).expect("dataset per scope").1;
                            let y = ds.target(target);
                            let (n_train, n_test, _) = split.counts(y.len());
                            let end = n_train + n_test;
                            let r = if n_train == 0 || n_test == 0 {
                                Err(ForecastError::EmptyTest)
                            } else {
                                fit_and_evaluate(m, &y[..end], &ds.exog[..end], n_train, params)
                            };
                            ((scope, target), r)
                        })
                        .collect();
                    (m, out)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("forecast worker panicked")).collect()
    });

    let mut table = ForecastTable::new();
    for (m, per_job) in results {
        for ((scope, target), r) in per_job {
            let what = format!("{} on {} {}", m.label(), scope.as_str(), target.suffix());
            let fit = r.map_err(|e| CliError::from(e).context(&what))?;
            if let AnyModel::Arima(am) = &fit.model {
                for w in &am.warnings {
                    log::warn!("{what}: {w}");
                }
            }
            table.insert(m.label(), scope, target, &fit.eval);
            let name = format!("{}_{}_{}", slug(m.label()), scope.as_str(), target.suffix());
            outputs.add(a.out.join("models").join(format!("{name}.json")), fit.model.to_json() + "\n");
            if a.plots {
                let ds = &data.iter().find(|(s, _)| *s == scope).expect("dataset per scope").1;
                let y = ds.target(target);
                let (n_train, n_test, _) = a.split.counts(y.len());
                let start = n_train + n_test - fit.eval.residuals.len();
                let rows = fit
                    .eval
                    .residuals
                    .iter()
                    .enumerate()
                    .map(|(i, e)| vec![ds.heights[start + i] as f64, y[start + i], y[start + i] - e])
                    .collect();
                let t = Table::new(&["index", "measured", "predicted"], rows);
                let unit = match target {
                    Target::Size => "block size (MB)",
                    Target::TxCount => "transactions per block (count)",
                };
                let labels = Labels::new(&format!("{} one-step forecast, {} blocks", m.label(), scope.as_str()), "block height (index)", unit);
                outputs.add(a.out.join(format!("overlay_{name}.csv")), t.to_csv());
                outputs.add(a.out.join(format!("overlay_{name}.svg")), render_plot(&t, PlotKind::SeriesOverlay, &labels)?);
            }
        }
    }
    outputs.add(a.out.join("forecast_table.csv"), table.to_csv());
    Ok(outputs)
}
