//! Exploratory statistics over block and transaction series.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::durbin_levinson;
use crate::model::{tag_day_class, BlockSeries, DayClass, TxRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExploreError {
    #[error("no samples")]
    Empty,
    #[error("sample {index} is not finite")]
    NotFinite { index: usize },
    #[error("sample {index} is not positive ({value})")]
    NonPositive { index: usize, value: f64 },
    #[error("series of length {len} is too short for lag {max_lag}")]
    TooShort { len: usize, max_lag: usize },
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("observation span {span} s is shorter than one slot of {slot_len} s")]
    SpanTooShort { span: f64, slot_len: f64 },
    #[error("slot length must be positive")]
    BadSlot,
    #[error("reference intensity is zero")]
    ZeroIntensity,
    #[error("both fits use the same slot length {0}")]
    SameSlot(f64),
    #[error("need at least 4 confirmed transactions, got {0}")]
    TooFewTxs(usize),
}

fn check_finite(samples: &[f64]) -> Result<(), ExploreError> {
    if samples.is_empty() {
        return Err(ExploreError::Empty);
    }
    match samples.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(ExploreError::NotFinite { index }),
        None => Ok(()),
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Empirical CDF over the distinct sample values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfTable {
    pub values: Vec<f64>,
    /// `probs[i]` = fraction of samples `<= values[i]`.
    pub probs: Vec<f64>,
    pub n: usize,
}

impl EcdfTable {
    /// Fraction of samples `<= x` (right-continuous step function).
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.values.partition_point(|v| *v <= x);
        if k == 0 {
            0.0
        } else {
            self.probs[k - 1]
        }
    }
}

pub fn ecdf(samples: &[f64]) -> Result<EcdfTable, ExploreError> {
    check_finite(samples)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut values = Vec::new();
    let mut probs = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        if i + 1 < n && sorted[i + 1] == v {
            continue;
        }
        values.push(v);
        probs.push((i + 1) as f64 / n as f64);
    }
    Ok(EcdfTable { values, probs, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    /// Maximum-likelihood rate, `1 / sample mean`.
    pub rate: f64,
    pub n: usize,
    /// Kolmogorov–Smirnov distance between the sample and the fitted CDF.
    pub ks_stat: f64,
}

impl ExponentialFit {
    pub fn mean(&self) -> f64 {
        1.0 / self.rate
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            -(-self.rate * x).exp_m1()
        }
    }
}

pub fn fit_exponential(samples: &[f64]) -> Result<ExponentialFit, ExploreError> {
    check_finite(samples)?;
    if let Some(index) = samples.iter().position(|v| *v <= 0.0) {
        return Err(ExploreError::NonPositive { index, value: samples[index] });
    }
    let rate = 1.0 / mean(samples);
    let fit = ExponentialFit { rate, n: samples.len(), ks_stat: 0.0 };
    let table = ecdf(samples)?;
    let mut below = 0.0;
    let mut ks: f64 = 0.0;
    for (&x, &p) in table.values.iter().zip(&table.probs) {
        let f = fit.cdf(x);
        ks = ks.max((p - f).abs()).max((f - below).abs());
        below = p;
    }
    Ok(ExponentialFit { ks_stat: ks.min(1.0), ..fit })
}

/// Exponential fit of inter-block times with non-positive gaps excluded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterblockFit {
    pub fit: ExponentialFit,
    pub excluded: usize,
}

pub fn fit_interblock_exponential(interblock: &[i64]) -> Result<InterblockFit, ExploreError> {
    let positive: Vec<f64> = interblock.iter().filter(|&&g| g > 0).map(|&g| g as f64).collect();
    let excluded = interblock.len() - positive.len();
    Ok(InterblockFit { fit: fit_exponential(&positive)?, excluded })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfResult {
    /// Correlation at lags `0..=max_lag`.
    pub values: Vec<f64>,
    /// Half-width of the ±1.96/√N white-noise band.
    pub confidence_band: f64,
    pub n: usize,
}

/// Biased autocovariances `c_k = (1/N) Σ (y_t - ȳ)(y_{t+k} - ȳ)` for `k = 0..=max_lag`.
pub(crate) fn autocovariances(series: &[f64], max_lag: usize) -> Vec<f64> {
    let n = series.len();
    let m = mean(series);
    let d: Vec<f64> = series.iter().map(|v| v - m).collect();
    (0..=max_lag)
        .map(|k| d[..n - k].iter().zip(&d[k..]).map(|(a, b)| a * b).sum::<f64>() / n as f64)
        .collect()
}

pub fn acf(series: &[f64], max_lag: usize) -> Result<AcfResult, ExploreError> {
    check_finite(series)?;
    if series.len() <= max_lag {
        return Err(ExploreError::TooShort { len: series.len(), max_lag });
    }
    let c = autocovariances(series, max_lag);
    if c[0] <= 0.0 {
        return Err(ExploreError::ZeroVariance);
    }
    let n = series.len();
    Ok(AcfResult {
        values: c.iter().map(|ck| (ck / c[0]).clamp(-1.0, 1.0)).collect(),
        confidence_band: 1.96 / (n as f64).sqrt(),
        n,
    })
}

/// Partial autocorrelations via the Durbin–Levinson recursion; lag 0 is 1.
pub fn pacf(series: &[f64], max_lag: usize) -> Result<AcfResult, ExploreError> {
    let a = acf(series, max_lag)?;
    let (_, partial, _) = durbin_levinson(&a.values, max_lag).ok_or(ExploreError::ZeroVariance)?;
    let mut values = Vec::with_capacity(max_lag + 1);
    values.push(1.0);
    values.extend(partial.iter().map(|v| v.clamp(-1.0, 1.0)));
    Ok(AcfResult { values, ..a })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonFit {
    /// Seconds.
    pub slot_len: f64,
    /// Mean number of events per slot (the Poisson MLE).
    pub intensity: f64,
    pub n_slots: usize,
    pub counts: Vec<u64>,
}

/// Counts events in consecutive full slots covering `[start, end)`; a
/// trailing partial slot is dropped.
pub fn fit_poisson_slots_in(timestamps: &[f64], slot_len: f64, start: f64, end: f64) -> Result<PoissonFit, ExploreError> {
    if !(slot_len > 0.0 && slot_len.is_finite()) {
        return Err(ExploreError::BadSlot);
    }
    let span = end - start;
    let n_slots = (span / slot_len).floor();
    if !(n_slots >= 1.0) {
        return Err(ExploreError::SpanTooShort { span, slot_len });
    }
    let n_slots = n_slots as usize;
    let mut counts = vec![0u64; n_slots];
    for &t in timestamps {
        if t < start {
            continue;
        }
        let k = ((t - start) / slot_len).floor() as usize;
        if k < n_slots {
            counts[k] += 1;
        }
    }
    let intensity = counts.iter().sum::<u64>() as f64 / n_slots as f64;
    Ok(PoissonFit { slot_len, intensity, n_slots, counts })
}

/// Slot fit over `[first, last)` of the given timestamps.
pub fn fit_poisson_slots(timestamps: &[f64], slot_len: f64) -> Result<PoissonFit, ExploreError> {
    check_finite(timestamps)?;
    let first = timestamps.iter().copied().fold(f64::INFINITY, f64::min);
    let last = timestamps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    fit_poisson_slots_in(timestamps, slot_len, first, last)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Consistent,
    Inconsistent,
}

/// Compares two slot intensities after rescaling to a common slot length.
///
/// `ratio = intensity_b / (intensity_a * slot_len_b / slot_len_a)`; a Poisson
/// process gives a ratio of 1 at every time scale.
pub fn poisson_consistency(a: &PoissonFit, b: &PoissonFit, tolerance: f64) -> Result<(f64, Verdict), ExploreError> {
    if a.slot_len == b.slot_len {
        return Err(ExploreError::SameSlot(a.slot_len));
    }
    if a.intensity == 0.0 {
        return Err(ExploreError::ZeroIntensity);
    }
    let ratio = b.intensity / (a.intensity * b.slot_len / a.slot_len);
    let verdict = if (ratio - 1.0).abs() <= tolerance { Verdict::Consistent } else { Verdict::Inconsistent };
    Ok((ratio, verdict))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttrStats {
    pub mean: f64,
    /// Sample standard deviation (n − 1); 0 for a single observation.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl AttrStats {
    fn of(v: &[f64]) -> Self {
        let m = mean(v);
        let sd = if v.len() > 1 {
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // clamp rounding so that min <= mean <= max holds exactly
        Self { mean: m.clamp(min, max), sd, min, max }
    }
}

/// Per-miner block attribute statistics in reporting units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinerSummary {
    pub miner: String,
    pub blocks: usize,
    /// Megabytes (10^6 bytes).
    pub size_mb: AttrStats,
    pub tx_count: AttrStats,
    /// BTC per transaction.
    pub avg_fee: AttrStats,
}

pub const BYTES_PER_MB: f64 = 1e6;

/// One row per miner, ordered by block count (descending) then label.
pub fn summary_by_miner(series: &BlockSeries) -> Result<Vec<MinerSummary>, ExploreError> {
    if series.is_empty() {
        return Err(ExploreError::Empty);
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, b) in series.blocks().iter().enumerate() {
        groups.entry(b.miner.as_str()).or_default().push(i);
    }
    let blocks = series.blocks();
    let mut rows: Vec<MinerSummary> = groups
        .into_iter()
        .map(|(miner, idx)| {
            let pick = |f: &dyn Fn(usize) -> f64| idx.iter().map(|&i| f(i)).collect::<Vec<f64>>();
            MinerSummary {
                miner: miner.to_string(),
                blocks: idx.len(),
                size_mb: AttrStats::of(&pick(&|i| blocks[i].size as f64 / BYTES_PER_MB)),
                tx_count: AttrStats::of(&pick(&|i| blocks[i].tx_count as f64)),
                avg_fee: AttrStats::of(&pick(&|i| blocks[i].avg_fee.as_btc_f64())),
            }
        })
        .collect();
    rows.sort_by(|a, b| b.blocks.cmp(&a.blocks).then_with(|| a.miner.cmp(&b.miner)));
    Ok(rows)
}

pub fn miner_block_counts(series: &BlockSeries) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for b in series.blocks() {
        *counts.entry(b.miner.clone()).or_insert(0) += 1;
    }
    counts
}

pub fn miner_block_counts_by_day_class(series: &BlockSeries) -> BTreeMap<(String, DayClass), usize> {
    let mut counts = BTreeMap::new();
    for b in series.blocks() {
        *counts.entry((b.miner.clone(), tag_day_class(b.timestamp))).or_insert(0) += 1;
    }
    counts
}

/// Linear-interpolation quantile of an ascending slice (`p` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    quantile_sorted(v, 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketStats {
    pub count: usize,
    /// Seconds; `None` for an empty bucket.
    pub mean_wait: Option<f64>,
    pub median_wait: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuartileReport {
    /// Fee breakpoints Q1, Q2, Q3 in BTC.
    pub breakpoints: [f64; 3],
    /// Buckets `[0, Q1]`, `(Q1, Q2]`, `(Q2, Q3]`, `(Q3, ∞)`.
    pub buckets: [BucketStats; 4],
    pub overall_mean: f64,
    pub total: usize,
    /// Set when two or more breakpoints coincide.
    pub degenerate: bool,
}

/// Confirmation time by fee quartile over the confirmed transactions in `txs`.
///
/// A fee equal to a breakpoint goes to the lower bucket.
pub fn confirmation_by_fee_quartile(txs: &[TxRecord]) -> Result<QuartileReport, ExploreError> {
    let confirmed: Vec<(f64, f64)> = txs
        .iter()
        .filter_map(|t| t.confirmation_time().map(|w| (t.fee.as_btc_f64(), w)))
        .collect();
    if confirmed.len() < 4 {
        return Err(ExploreError::TooFewTxs(confirmed.len()));
    }
    let mut fees: Vec<f64> = confirmed.iter().map(|c| c.0).collect();
    fees.sort_by(f64::total_cmp);
    let q = [0.25, 0.5, 0.75].map(|p| quantile_sorted(&fees, p));
    let mut waits: [Vec<f64>; 4] = Default::default();
    for &(fee, wait) in &confirmed {
        let k = q.iter().position(|&b| fee <= b).unwrap_or(3);
        waits[k].push(wait);
    }
    let buckets = waits.map(|mut w| BucketStats {
        count: w.len(),
        mean_wait: (!w.is_empty()).then(|| mean(&w)),
        median_wait: (!w.is_empty()).then(|| median(&mut w)),
    });
    let overall: Vec<f64> = confirmed.iter().map(|c| c.1).collect();
    Ok(QuartileReport {
        breakpoints: q,
        buckets,
        overall_mean: mean(&overall),
        total: confirmed.len(),
        degenerate: q[0] == q[1] || q[1] == q[2],
    })
}

/// Equal-width histogram: `(bin_left, bin_right, count)`.
pub fn histogram(samples: &[f64], bins: usize) -> Result<Vec<(f64, f64, usize)>, ExploreError> {
    check_finite(samples)?;
    let bins = bins.max(1);
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &s in samples {
        let k = (((s - lo) / width).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + i as f64 * width, lo + (i + 1) as f64 * width, c))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::block;
    use crate::model::Btc;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ecdf_examples() {
        assert_eq!(ecdf(&[5.0]).unwrap().eval(5.0), 1.0);
        assert_eq!(ecdf(&[1.0, 2.0, 3.0, 4.0]).unwrap().eval(2.0), 0.5);
        let t = ecdf(&[1.0, 1.0, 2.0]).unwrap();
        assert!((t.eval(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(t.eval(0.999), 0.0);
        assert_eq!(*t.probs.last().unwrap(), 1.0);
        assert_eq!(ecdf(&[]), Err(ExploreError::Empty));
    }

    #[test]
    fn exponential_examples() {
        assert_eq!(fit_exponential(&[2.0, 2.0, 2.0]).unwrap().rate, 0.5);

        // hand computation: F(1) = 1 - e^-0.5, F(3) = 1 - e^-1.5
        let f = fit_exponential(&[1.0, 3.0]).unwrap();
        assert_eq!(f.rate, 0.5);
        let f1 = 1.0 - (-0.5f64).exp();
        let f3 = 1.0 - (-1.5f64).exp();
        let expect = [f1 - 0.0, 0.5 - f1, f3 - 0.5, 1.0 - f3].iter().map(|v: &f64| v.abs()).fold(0.0, f64::max);
        assert!((f.ks_stat - expect).abs() < 1e-15);
        assert!((f.ks_stat - 0.393_469_340_287_366_6).abs() < 1e-12);

        assert!(matches!(fit_exponential(&[1.0, 0.0]), Err(ExploreError::NonPositive { index: 1, .. })));
        assert!(fit_exponential(&[]).is_err());
    }

    #[test]
    fn exponential_quantiles_fit_tightly() {
        let n = 1000;
        let q: Vec<f64> = (1..=n).map(|i| -(1.0 - (i as f64 - 0.5) / n as f64).ln()).collect();
        let f = fit_exponential(&q).unwrap();
        assert!(f.ks_stat < 0.01, "ks {}", f.ks_stat);
        assert!((f.rate - 1.0).abs() < 0.01);
    }

    #[test]
    fn interblock_fit_excludes_nonpositive() {
        let r = fit_interblock_exponential(&[600, -50, 0, 300]).unwrap();
        assert_eq!(r.excluded, 2);
        assert_eq!(r.fit.n, 2);
        assert!((r.fit.mean() - 450.0).abs() < 1e-9);
    }

    #[test]
    fn acf_examples() {
        let a = acf(&[1.0, 2.0, 3.0, 4.0], 1).unwrap();
        assert_eq!(a.values[0], 1.0);
        assert!((a.values[1] - 0.25).abs() < 1e-15);
        assert!(matches!(acf(&[1.0, 2.0], 2), Err(ExploreError::TooShort { .. })));
        assert_eq!(acf(&[3.0; 10], 2), Err(ExploreError::ZeroVariance));
    }

    #[test]
    fn white_noise_acf_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 10_000;
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let a = acf(&x, 20).unwrap();
        let bound = 3.0 / (n as f64).sqrt();
        assert!(a.values[1..].iter().all(|r| r.abs() < bound), "{:?}", a.values);
        assert!((a.confidence_band - 1.96 / 100.0).abs() < 1e-15);
    }

    #[test]
    fn pacf_of_ar1_cuts_off() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut y = vec![0.0];
        for _ in 0..20_000 {
            let e: f64 = rng.random::<f64>() - 0.5;
            let prev = *y.last().unwrap();
            y.push(0.7 * prev + e);
        }
        let p = pacf(&y, 5).unwrap();
        assert!((p.values[1] - 0.7).abs() < 0.03);
        assert!(p.values[2..].iter().all(|v| v.abs() < 0.03));
        // lag-1 PACF equals lag-1 ACF
        let a = acf(&y, 1).unwrap();
        assert!((p.values[1] - a.values[1]).abs() < 1e-12);
    }

    #[test]
    fn poisson_slot_examples() {
        let f = fit_poisson_slots_in(&[10.0, 20.0, 70.0, 80.0], 60.0, 10.0, 130.0).unwrap();
        assert_eq!(f.counts, vec![2, 2]);
        assert_eq!(f.intensity, 2.0);
        let empty = fit_poisson_slots_in(&[], 60.0, 0.0, 300.0).unwrap();
        assert_eq!((empty.n_slots, empty.intensity), (5, 0.0));
        // trailing partial slot dropped
        let g = fit_poisson_slots(&[0.0, 10.0, 59.0, 61.0, 100.0], 60.0).unwrap();
        assert_eq!((g.n_slots, g.counts.clone()), (1, vec![3]));
        assert!(matches!(fit_poisson_slots(&[0.0, 10.0], 60.0), Err(ExploreError::SpanTooShort { .. })));
    }

    #[test]
    fn poisson_consistency_examples() {
        let fit = |slot: f64, lambda: f64| PoissonFit { slot_len: slot, intensity: lambda, n_slots: 10, counts: vec![] };
        let (r, v) = poisson_consistency(&fit(6000.0, 9.44707), &fit(60_000.0, 103.184), 0.05).unwrap();
        assert!((r - 103.184 / 94.4707).abs() < 1e-12);
        assert!((r - 1.0922).abs() < 1e-4);
        assert_eq!(v, Verdict::Inconsistent);
        let (r, v) = poisson_consistency(&fit(6000.0, 5.0), &fit(60_000.0, 50.0), 0.0).unwrap();
        assert_eq!((r, v), (1.0, Verdict::Consistent));
        assert_eq!(poisson_consistency(&fit(6000.0, 0.0), &fit(60_000.0, 1.0), 0.1), Err(ExploreError::ZeroIntensity));
        assert!(poisson_consistency(&fit(60.0, 1.0), &fit(60.0, 1.0), 0.1).is_err());
    }

    #[test]
    fn homogeneous_slots_concentrate() {
        let ts = crate::simulate::sample_arrivals(&crate::simulate::ArrivalModel::Poisson { rate: 0.01 }, 6e6, 21);
        let f = fit_poisson_slots_in(&ts, 6000.0, 0.0, 6e6).unwrap();
        let expect = 60.0;
        // standard error of the slot mean over 1000 slots
        assert!((f.intensity - expect).abs() < 3.0 * (expect / 1000.0).sqrt(), "{}", f.intensity);
    }

    fn series(rows: &[(&str, i64, i64, i64)]) -> BlockSeries {
        let blocks = rows
            .iter()
            .enumerate()
            .map(|(i, &(m, size, n, fee))| {
                let mut b = block(i as u64, 600 * i as i64, m);
                b.size = size;
                b.tx_count = n;
                b.avg_fee = Btc::from_sats(fee);
                b
            })
            .collect();
        BlockSeries::new(blocks).unwrap()
    }

    #[test]
    fn miner_summary_examples() {
        let s = series(&[("A", 1_000_000, 1000, 10_000)]);
        let r = summary_by_miner(&s).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].size_mb, AttrStats { mean: 1.0, sd: 0.0, min: 1.0, max: 1.0 });
        assert_eq!(r[0].tx_count.mean, 1000.0);
        assert!((r[0].avg_fee.mean - 1e-4).abs() < 1e-18);

        let s = series(&[("A", 1_000_000, 1, 0), ("A", 3_000_000, 1, 0)]);
        let r = summary_by_miner(&s).unwrap();
        assert_eq!(r[0].size_mb.mean, 2.0);
        assert!((r[0].size_mb.sd - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(r[0].blocks, 2);
        assert_eq!(summary_by_miner(&BlockSeries::empty()), Err(ExploreError::Empty));
    }

    #[test]
    fn miner_counts() {
        let s = series(&[("A", 1, 1, 0), ("B", 1, 1, 0), ("A", 1, 1, 0), ("A", 1, 1, 0)]);
        let c = miner_block_counts(&s);
        assert_eq!(c, BTreeMap::from([("A".to_string(), 3), ("B".to_string(), 1)]));
        assert!(miner_block_counts(&BlockSeries::empty()).is_empty());
        let by_day = miner_block_counts_by_day_class(&s);
        assert_eq!(by_day.values().sum::<usize>(), 4);
        // epoch day is a Thursday
        assert_eq!(by_day[&("A".to_string(), DayClass::Working)], 3);
    }

    fn tx(fee_sats: i64, wait: f64) -> TxRecord {
        TxRecord { id: String::new(), arrival_ts: 0.0, confirm_ts: Some(wait), fee: Btc::from_sats(fee_sats), size: 100 }
    }

    #[test]
    fn quartile_examples() {
        let r = confirmation_by_fee_quartile(&[tx(1, 40.0), tx(2, 30.0), tx(3, 20.0), tx(4, 10.0)]).unwrap();
        let means: Vec<f64> = r.buckets.iter().map(|b| b.mean_wait.unwrap()).collect();
        assert_eq!(means, vec![40.0, 30.0, 20.0, 10.0]);
        assert!(!r.degenerate);
        assert_eq!(r.overall_mean, 25.0);

        let r = confirmation_by_fee_quartile(&[tx(5, 1.0), tx(5, 2.0), tx(5, 3.0), tx(5, 4.0), tx(5, 5.0)]).unwrap();
        assert_eq!(r.buckets[0].count, 5);
        assert!(r.degenerate);

        let mut unconfirmed = tx(1, 0.0);
        unconfirmed.confirm_ts = None;
        assert_eq!(
            confirmation_by_fee_quartile(&[tx(1, 1.0), tx(1, 1.0), tx(1, 1.0), unconfirmed]),
            Err(ExploreError::TooFewTxs(3))
        );
    }

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.25), 1.75);
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
    }

    proptest! {
        #[test]
        fn ecdf_permutation_invariant(mut v in proptest::collection::vec(-1e6f64..1e6, 1..50), x in -1e6f64..1e6) {
            let a = ecdf(&v).unwrap();
            v.reverse();
            let b = ecdf(&v).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!(a.probs.windows(2).all(|w| w[0] <= w[1]));
            let brute = v.iter().filter(|s| **s <= x).count() as f64 / v.len() as f64;
            prop_assert!((a.eval(x) - brute).abs() < 1e-12);
        }

        #[test]
        fn exponential_scale_equivariant(v in proptest::collection::vec(0.01f64..1e3, 2..40), c in 0.01f64..100.0) {
            let a = fit_exponential(&v).unwrap();
            let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
            let b = fit_exponential(&scaled).unwrap();
            prop_assert!((b.rate - a.rate / c).abs() <= 1e-9 * a.rate / c);
            prop_assert!((b.ks_stat - a.ks_stat).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&a.ks_stat));
        }

        #[test]
        fn acf_affine_invariant(v in proptest::collection::vec(-100f64..100.0, 12..60), a in 0.1f64..10.0, neg in any::<bool>(), b in -50f64..50.0) {
            let scale = if neg { -a } else { a };
            prop_assume!(acf(&v, 5).is_ok());
            let r = acf(&v, 5).unwrap();
            let w: Vec<f64> = v.iter().map(|x| scale * x + b).collect();
            let s = acf(&w, 5).unwrap();
            for (x, y) in r.values.iter().zip(&s.values) {
                prop_assert!((x - y).abs() < 1e-9);
                prop_assert!((-1.0..=1.0).contains(x));
            }
        }

        #[test]
        fn quartile_buckets_partition(fees in proptest::collection::vec(0i64..1000, 4..80)) {
            let txs: Vec<TxRecord> = fees.iter().enumerate().map(|(i, &f)| tx(f, i as f64)).collect();
            let r = confirmation_by_fee_quartile(&txs).unwrap();
            prop_assert_eq!(r.buckets.iter().map(|b| b.count).sum::<usize>(), txs.len());
        }

        #[test]
        fn summary_bounds(rows in proptest::collection::vec((0usize..3, 0i64..4_000_000, 0i64..5000, 0i64..100_000), 1..30)) {
            let names = ["A", "B", "C"];
            let r: Vec<(&str, i64, i64, i64)> = rows.iter().map(|&(m, s, n, f)| (names[m], s, n, f)).collect();
            let out = summary_by_miner(&series(&r)).unwrap();
            prop_assert_eq!(out.iter().map(|m| m.blocks).sum::<usize>(), r.len());
            for m in out {
                for a in [m.size_mb, m.tx_count, m.avg_fee] {
                    prop_assert!(a.min <= a.mean && a.mean <= a.max);
                }
            }
        }
    }

    #[test]
    fn homogeneous_poisson_is_consistent_across_seeds() {
        // >= 99% Consistent at tol 0.05 with >= 500 slots of the longer length
        let mut consistent = 0;
        let trials = 100;
        for seed in 0..trials {
            let ts = crate::simulate::sample_arrivals(&crate::simulate::ArrivalModel::Poisson { rate: 1.0 / 60.0 }, 3.0e6, seed);
            let a = fit_poisson_slots_in(&ts, 600.0, 0.0, 3.0e6).unwrap();
            let b = fit_poisson_slots_in(&ts, 6000.0, 0.0, 3.0e6).unwrap();
            assert!(b.n_slots >= 500);
            if poisson_consistency(&a, &b, 0.05).unwrap().1 == Verdict::Consistent {
                consistent += 1;
            }
        }
        assert!(consistent as f64 >= 0.99 * trials as f64, "{consistent}/{trials}");
    }
}
