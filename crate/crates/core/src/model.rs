//! Domain records shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Satoshis per bitcoin.
pub const SATS_PER_BTC: i64 = 100_000_000;

const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("series has {0} block(s); at least 2 are required")]
    EmptySeries(usize),
    #[error("block heights must be strictly increasing (height {next} follows {prev})")]
    HeightOrder { prev: u64, next: u64 },
    #[error("invalid BTC amount {0:?}")]
    InvalidAmount(String),
}

/// A bitcoin amount with fixed 8-decimal precision, stored as signed satoshis.
///
/// Signed so that malformed input can be represented and then reported by
/// [`validate_series`] instead of being rejected at parse time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Btc(i64);

impl Btc {
    pub const ZERO: Btc = Btc(0);

    pub const fn from_sats(sats: i64) -> Self {
        Btc(sats)
    }

    pub const fn sats(self) -> i64 {
        self.0
    }

    /// Nearest satoshi to a floating BTC amount.
    pub fn from_btc_f64(btc: f64) -> Self {
        Btc((btc * SATS_PER_BTC as f64).round() as i64)
    }

    pub fn as_btc_f64(self) -> f64 {
        self.0 as f64 / SATS_PER_BTC as f64
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }
}

impl fmt::Display for Btc {
    /// Shortest exact decimal: `0.00018`, `1.2`, `3`, `-0.5`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let whole = abs / SATS_PER_BTC as u64;
        let frac = abs % SATS_PER_BTC as u64;
        if frac == 0 {
            return write!(f, "{sign}{whole}");
        }
        let digits = format!("{frac:08}");
        write!(f, "{sign}{whole}.{}", digits.trim_end_matches('0'))
    }
}

impl FromStr for Btc {
    type Err = ModelError;

    /// Parses a plain decimal. More than 8 fractional digits are rounded
    /// half away from zero to the nearest satoshi.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::InvalidAmount(s.to_string());
        let t = s.trim();
        let (neg, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        if body.is_empty() {
            return Err(bad());
        }
        let (whole, frac) = match body.split_once('.') {
            Some((w, f)) => (w, f),
            None => (body, ""),
        };
        if whole.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let whole_sats: i64 = if whole.is_empty() {
            0
        } else {
            whole
                .parse::<i64>()
                .ok()
                .and_then(|w| w.checked_mul(SATS_PER_BTC))
                .ok_or_else(bad)?
        };
        let mut frac_sats: i64 = 0;
        for (i, c) in frac.chars().take(8).enumerate() {
            frac_sats += (c as i64 - '0' as i64) * 10_i64.pow(7 - i as u32);
        }
        if let Some(c) = frac.chars().nth(8) {
            if c >= '5' {
                frac_sats += 1;
            }
        }
        let total = whole_sats.checked_add(frac_sats).ok_or_else(bad)?;
        Ok(Btc(if neg { -total } else { total }))
    }
}

/// Node mempool state recorded alongside a block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MempoolSnapshot {
    pub tx_count: i64,
    pub total_bytes: i64,
    pub total_fee: Btc,
}

/// One ledger block as observed by the measuring node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub height: u64,
    /// Miner-reported timestamp, seconds since the Unix epoch (UTC).
    pub timestamp: i64,
    /// Mining pool label; `"?"` when unknown.
    pub miner: String,
    /// Bytes.
    pub size: i64,
    pub tx_count: i64,
    /// Average fee per transaction.
    pub avg_fee: Btc,
    pub mempool: MempoolSnapshot,
}

/// Label used for blocks whose miner could not be attributed.
pub const UNKNOWN_MINER: &str = "?";

/// Blocks ordered by strictly increasing height, with derived inter-block times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BlockSeries {
    blocks: Vec<BlockRecord>,
    interblock: Vec<i64>,
}

impl BlockSeries {
    pub fn new(blocks: Vec<BlockRecord>) -> Result<Self, ModelError> {
        for w in blocks.windows(2) {
            if w[1].height <= w[0].height {
                return Err(ModelError::HeightOrder { prev: w[0].height, next: w[1].height });
            }
        }
        let interblock = blocks
            .windows(2)
            .map(|w| w[1].timestamp - w[0].timestamp)
            .collect();
        Ok(Self { blocks, interblock })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn blocks(&self) -> &[BlockRecord] {
        &self.blocks
    }

    /// `interblock()[k] = blocks[k+1].timestamp - blocks[k].timestamp`.
    pub fn interblock(&self) -> &[i64] {
        &self.interblock
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn into_blocks(self) -> Vec<BlockRecord> {
        self.blocks
    }

    /// Contiguous sub-series `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> BlockSeries {
        let blocks = self.blocks[start..end].to_vec();
        let interblock = if end - start >= 2 {
            self.interblock[start..end - 1].to_vec()
        } else {
            Vec::new()
        };
        BlockSeries { blocks, interblock }
    }

    pub fn sizes(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.size as f64).collect()
    }

    pub fn tx_counts(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.tx_count as f64).collect()
    }

    pub fn avg_fees(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.avg_fee.as_btc_f64()).collect()
    }

    pub fn timestamps(&self) -> Vec<i64> {
        self.blocks.iter().map(|b| b.timestamp).collect()
    }
}

/// One transaction as seen by the node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxRecord {
    pub id: String,
    /// Seconds since the epoch at which the node first saw the transaction.
    pub arrival_ts: f64,
    /// Timestamp of the confirming block, if confirmed.
    pub confirm_ts: Option<f64>,
    pub fee: Btc,
    /// Bytes; always positive.
    pub size: u64,
}

impl TxRecord {
    pub fn is_confirmed(&self) -> bool {
        self.confirm_ts.is_some()
    }

    /// Seconds between arrival and confirmation.
    pub fn confirmation_time(&self) -> Option<f64> {
        self.confirm_ts.map(|c| c - self.arrival_ts)
    }

    /// Satoshis per byte.
    pub fn fee_rate(&self) -> f64 {
        self.fee.sats() as f64 / self.size as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DayClass {
    Working,
    Weekend,
}

impl DayClass {
    pub fn as_str(self) -> &'static str {
        match self {
            DayClass::Working => "working",
            DayClass::Weekend => "weekend",
        }
    }
}

impl fmt::Display for DayClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DayClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "working" | "workday" | "working_day" => Ok(DayClass::Working),
            "weekend" | "weekend_day" => Ok(DayClass::Weekend),
            other => Err(format!("unknown day class {other:?}")),
        }
    }
}

/// Weekend iff the UTC calendar day of `timestamp` is a Saturday or Sunday.
pub fn tag_day_class(timestamp: i64) -> DayClass {
    // 1970-01-01 was a Thursday; weekday 0 = Monday.
    let weekday = (timestamp.div_euclid(SECONDS_PER_DAY) + 3).rem_euclid(7);
    if weekday >= 5 {
        DayClass::Weekend
    } else {
        DayClass::Working
    }
}

/// Differences of consecutive block timestamps. Negative gaps are kept.
pub fn derive_interblock_times(blocks: &[BlockRecord]) -> Result<Vec<i64>, ModelError> {
    if blocks.len() < 2 {
        return Err(ModelError::EmptySeries(blocks.len()));
    }
    Ok(blocks.windows(2).map(|w| w[1].timestamp - w[0].timestamp).collect())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_records: usize,
    pub n_negative_intervals: usize,
    pub n_schema_errors: usize,
    pub messages: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.n_negative_intervals == 0 && self.n_schema_errors == 0
    }

    pub(crate) fn schema_error(&mut self, msg: String) {
        self.n_schema_errors += 1;
        self.messages.push(msg);
    }
}

/// Reports schema violations and non-monotonic timestamps without touching the input.
pub fn validate_series(series: &BlockSeries) -> ValidationReport {
    let mut report = ValidationReport { n_records: series.len(), ..Default::default() };
    for b in series.blocks() {
        let h = b.height;
        if b.size < 0 {
            report.schema_error(format!("height {h}: field size is negative ({})", b.size));
        }
        if b.tx_count < 0 {
            report.schema_error(format!("height {h}: field tx_count is negative ({})", b.tx_count));
        }
        if b.avg_fee.is_negative() {
            report.schema_error(format!("height {h}: field avg_fee is negative ({})", b.avg_fee));
        }
        let m = &b.mempool;
        if m.tx_count < 0 {
            report.schema_error(format!("height {h}: field mempool_tx_count is negative ({})", m.tx_count));
        }
        if m.total_bytes < 0 {
            report.schema_error(format!("height {h}: field mempool_bytes is negative ({})", m.total_bytes));
        }
        if m.total_fee.is_negative() {
            report.schema_error(format!("height {h}: field mempool_fee is negative ({})", m.total_fee));
        }
        if m.tx_count == 0 && (m.total_bytes != 0 || m.total_fee != Btc::ZERO) {
            report.schema_error(format!(
                "height {h}: empty mempool (mempool_tx_count = 0) with nonzero mempool_bytes/mempool_fee"
            ));
        }
    }
    for (k, &gap) in series.interblock().iter().enumerate() {
        if gap < 0 {
            report.n_negative_intervals += 1;
            let b = &series.blocks()[k + 1];
            report
                .messages
                .push(format!("height {}: negative inter-block time {gap} s", b.height));
        }
    }
    report
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;

    fn blocks_at(ts: &[i64]) -> Vec<BlockRecord> {
        series_from_ts(ts).into_blocks()
    }

    #[test]
    fn interblock_examples() {
        assert_eq!(derive_interblock_times(&blocks_at(&[0, 300, 900])).unwrap(), vec![300, 600]);
        assert_eq!(derive_interblock_times(&blocks_at(&[100, 100])).unwrap(), vec![0]);
        let s = series_from_ts(&[600, 550, 1200]);
        assert_eq!(s.interblock(), &[-50, 650]);
        assert_eq!(validate_series(&s).n_negative_intervals, 1);
    }

    #[test]
    fn interblock_needs_two_blocks() {
        assert_eq!(derive_interblock_times(&blocks_at(&[5])), Err(ModelError::EmptySeries(1)));
        assert_eq!(derive_interblock_times(&[]), Err(ModelError::EmptySeries(0)));
    }

    #[test]
    fn day_class_calendar() {
        let sat = Utc.with_ymd_and_hms(2019, 3, 9, 12, 0, 0).unwrap().timestamp();
        let thu = Utc.with_ymd_and_hms(2019, 3, 7, 0, 0, 0).unwrap().timestamp();
        let sun = Utc.with_ymd_and_hms(2019, 3, 10, 23, 59, 0).unwrap().timestamp();
        assert_eq!(tag_day_class(sat), DayClass::Weekend);
        assert_eq!(tag_day_class(thu), DayClass::Working);
        assert_eq!(tag_day_class(sun), DayClass::Weekend);
        // Monday 00:00 right after
        assert_eq!(tag_day_class(sun + 60), DayClass::Working);
        // pre-epoch: 1969-12-27 was a Saturday
        let old = Utc.with_ymd_and_hms(1969, 12, 27, 3, 0, 0).unwrap().timestamp();
        assert_eq!(tag_day_class(old), DayClass::Weekend);
    }

    #[test]
    fn validation_counts() {
        let s = series_from_ts(&[0, 600, 1200]);
        let r = validate_series(&s);
        assert_eq!((r.n_records, r.n_negative_intervals, r.n_schema_errors), (3, 0, 0));

        let mut blocks = blocks_at(&[0, 600]);
        blocks[1].size = -5;
        let r = validate_series(&BlockSeries::new(blocks).unwrap());
        assert!(r.n_schema_errors >= 1);
        assert!(r.messages.iter().any(|m| m.contains("size")));
    }

    #[test]
    fn series_rejects_unordered_heights() {
        let mut blocks = blocks_at(&[0, 600]);
        blocks[1].height = 0;
        assert!(matches!(BlockSeries::new(blocks), Err(ModelError::HeightOrder { .. })));
    }

    #[test]
    fn btc_parse_and_format() {
        assert_eq!("0.00018".parse::<Btc>().unwrap().sats(), 18_000);
        assert_eq!("1.2".parse::<Btc>().unwrap().sats(), 120_000_000);
        assert_eq!("-0.5".parse::<Btc>().unwrap().sats(), -50_000_000);
        assert_eq!("0.000000015".parse::<Btc>().unwrap().sats(), 2);
        assert_eq!(Btc::from_sats(18_000).to_string(), "0.00018");
        assert_eq!(Btc::from_sats(300_000_000).to_string(), "3");
        assert_eq!(Btc::from_sats(0).to_string(), "0");
        assert!("abc".parse::<Btc>().is_err());
        assert!("".parse::<Btc>().is_err());
        assert!("1.2.3".parse::<Btc>().is_err());
    }

    proptest! {
        #[test]
        fn interblock_translation_invariant(ts in proptest::collection::vec(-1_000_000i64..1_000_000, 2..40), shift in -1_000_000_000i64..1_000_000_000) {
            let a = derive_interblock_times(&blocks_at(&ts)).unwrap();
            let shifted: Vec<i64> = ts.iter().map(|t| t + shift).collect();
            let b = derive_interblock_times(&blocks_at(&shifted)).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.iter().sum::<i64>(), ts[ts.len() - 1] - ts[0]);
        }

        #[test]
        fn day_class_weekly_period(t in -5_000_000_000i64..5_000_000_000) {
            prop_assert_eq!(tag_day_class(t), tag_day_class(t + 7 * 86_400));
            let dt = chrono::DateTime::from_timestamp(t, 0).unwrap();
            use chrono::Datelike;
            let weekend = matches!(dt.weekday(), chrono::Weekday::Sat | chrono::Weekday::Sun);
            prop_assert_eq!(tag_day_class(t) == DayClass::Weekend, weekend);
        }

        #[test]
        fn btc_display_roundtrip(sats in -10_000_000_000_000i64..10_000_000_000_000) {
            let b = Btc::from_sats(sats);
            prop_assert_eq!(b.to_string().parse::<Btc>().unwrap(), b);
        }
    }
}
