use std::fs;
use std::path::PathBuf;

use chainpulse::simulate::{run_simulation, ArrivalModel, IntervalModulation, MinerPolicy, SimConfig};
use clap::Args;

use super::parse_list;
use crate::error::{CliError, CliResult};
use crate::output::Outputs;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Full simulator configuration as JSON; the flags below override it.
    #[arg(long, value_name = "FILE")]
    pub sim_config: Option<PathBuf>,
    /// Simulated seconds.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Mean inter-block time in seconds.
    #[arg(long)]
    pub block_interval: Option<f64>,
    /// Poisson transaction arrivals per second.
    #[arg(long, conflicts_with = "mmpp")]
    pub arrival_rate: Option<f64>,
    /// Two-state modulated arrivals: `rate_low,rate_high,switch_low_high,switch_high_low`.
    #[arg(long)]
    pub mmpp: Option<String>,
    /// Block-rate modulation depth in [0, 1).
    #[arg(long)]
    pub interval_depth: Option<f64>,
    /// Mean seconds spent in each block-rate state.
    #[arg(long, default_value_t = 21_600.0)]
    pub interval_dwell: f64,
    /// JSON array of pools (`name`, `hash_share`, `size_cap`, `min_fee_rate`, `selection`).
    #[arg(long, value_name = "FILE")]
    pub pools: Option<PathBuf>,
    /// Unix timestamp of simulated time zero.
    #[arg(long, allow_negative_numbers = true)]
    pub start_ts: Option<i64>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf, outputs: &mut Outputs) -> CliResult<T> {
    outputs.input(path);
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn build_config(a: &SimulateArgs, seed: Option<u64>, outputs: &mut Outputs) -> CliResult<SimConfig> {
    let mut cfg: SimConfig = match &a.sim_config {
        Some(p) => read_json(p, outputs)?,
        None => SimConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(h) = a.horizon {
        cfg.horizon = h;
    }
    if let Some(b) = a.block_interval {
        cfg.block_interval_mean = b;
    }
    if let Some(rate) = a.arrival_rate {
        cfg.tx_arrival = ArrivalModel::Poisson { rate };
    }
    if let Some(m) = &a.mmpp {
        let v = parse_list(m).map_err(|e| CliError::usage(format!("--mmpp: {e}")))?;
        let [rate_low, rate_high, switch_low_high, switch_high_low] = v[..] else {
            return Err(CliError::usage(format!("--mmpp needs four values, got {}", v.len())));
        };
        cfg.tx_arrival = ArrivalModel::Mmpp2 { rate_low, rate_high, switch_low_high, switch_high_low };
    }
    if let Some(depth) = a.interval_depth {
        cfg.interval_modulation = (depth > 0.0).then_some(IntervalModulation { depth, mean_dwell: a.interval_dwell });
    }
    if let Some(p) = &a.pools {
        cfg.pools = read_json::<Vec<MinerPolicy>>(p, outputs)?;
    }
    if let Some(t) = a.start_ts {
        cfg.start_ts = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(a: SimulateArgs, seed: Option<u64>) -> CliResult<Outputs> {
    let mut outputs = Outputs::new();
    let cfg = build_config(&a, seed, &mut outputs)?;
    let sim = run_simulation(&cfg)?;
    log::info!("simulated {} blocks and {} transactions", sim.blocks.len(), sim.txs.len());
    for (name, bytes) in sim.files() {
        outputs.add(a.out.join(name), bytes);
    }
    Ok(outputs)
}
