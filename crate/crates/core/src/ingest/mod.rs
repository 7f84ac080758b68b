//! Flat-file persistence of block and transaction datasets, chronological
//! splitting, day-class filtering and live collection from a node.
//!
//! Block CSV columns (exact order):
//! `height,timestamp,miner,size_bytes,tx_count,avg_fee_btc,mempool_tx_count,mempool_bytes,mempool_fee_btc`
//!
//! Transaction CSV columns: `id,arrival_ts,confirm_ts,fee_btc,size_bytes`.
//! Files are UTF-8 with LF line endings and `.` as the decimal separator.

mod rpc;

pub use rpc::{
    collect_from_node, merge_series, CollectError, CollectOutcome, HttpTransport, NodeEndpoint,
    RetryPolicy, RpcError, RpcTransport, RPC_PASS_ENV, RPC_USER_ENV,
};

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    tag_day_class, validate_series, BlockRecord, BlockSeries, Btc, DayClass, MempoolSnapshot,
    ModelError, TxRecord, ValidationReport, UNKNOWN_MINER,
};

pub const BLOCK_HEADER: [&str; 9] = [
    "height",
    "timestamp",
    "miner",
    "size_bytes",
    "tx_count",
    "avg_fee_btc",
    "mempool_tx_count",
    "mempool_bytes",
    "mempool_fee_btc",
];

pub const TX_HEADER: [&str; 5] = ["id", "arrival_ts", "confirm_ts", "fee_btc", "size_bytes"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("header mismatch: expected [{}], found [{}]", .expected.join(","), .found.join(","))]
    HeaderMismatch { expected: Vec<String>, found: Vec<String> },
    #[error("row {row}, column {column}: cannot parse {value:?}")]
    Cell { row: usize, column: String, value: String },
    #[error("row {row}: expected {expected} fields, found {found}")]
    FieldCount { row: usize, expected: usize, found: usize },
    #[error("duplicate block height {0}")]
    DuplicateHeight(u64),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("cannot split an empty series")]
    EmptySeries,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A loaded block file together with its validation findings.
#[derive(Debug, Clone)]
pub struct LoadedBlocks {
    pub series: BlockSeries,
    pub report: ValidationReport,
}

#[derive(Debug, Clone)]
pub struct LoadedTxs {
    pub txs: Vec<TxRecord>,
    pub report: ValidationReport,
}

fn read_file(path: &Path) -> Result<Vec<u8>, IngestError> {
    fs::read(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })
}

fn reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(bytes)
}

fn check_header(rdr: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<(), IngestError> {
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if found.len() != expected.len() || found.iter().zip(expected).any(|(f, e)| f != e) {
        return Err(IngestError::HeaderMismatch {
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found,
        });
    }
    Ok(())
}

struct Row<'a> {
    record: &'a csv::StringRecord,
    /// 1-based line number in the file (header is line 1).
    line: usize,
    header: &'a [&'a str],
}

impl Row<'_> {
    fn raw(&self, col: usize) -> &str {
        self.record.get(col).unwrap_or("")
    }

    fn parse<T: std::str::FromStr>(&self, col: usize) -> Result<T, IngestError> {
        let v = self.raw(col);
        v.trim().parse::<T>().map_err(|_| IngestError::Cell {
            row: self.line,
            column: self.header[col].to_string(),
            value: v.to_string(),
        })
    }
}

/// Parses a block CSV document. Rows are sorted by height; duplicate heights are an error.
pub fn parse_block_csv(bytes: &[u8]) -> Result<LoadedBlocks, IngestError> {
    let mut rdr = reader(bytes);
    check_header(&mut rdr, &BLOCK_HEADER)?;
    let mut blocks = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != BLOCK_HEADER.len() {
            return Err(IngestError::FieldCount { row: line, expected: BLOCK_HEADER.len(), found: rec.len() });
        }
        let row = Row { record: &rec, line, header: &BLOCK_HEADER };
        let miner = row.raw(2).trim();
        blocks.push(BlockRecord {
            height: row.parse(0)?,
            timestamp: row.parse(1)?,
            miner: if miner.is_empty() { UNKNOWN_MINER.to_string() } else { miner.to_string() },
            size: row.parse(3)?,
            tx_count: row.parse(4)?,
            avg_fee: row.parse::<Btc>(5)?,
            mempool: MempoolSnapshot {
                tx_count: row.parse(6)?,
                total_bytes: row.parse(7)?,
                total_fee: row.parse::<Btc>(8)?,
            },
        });
    }
    blocks.sort_by_key(|b| b.height);
    if let Some(w) = blocks.windows(2).find(|w| w[0].height == w[1].height) {
        return Err(IngestError::DuplicateHeight(w[0].height));
    }
    let series = BlockSeries::new(blocks)?;
    let mut report = validate_series(&series);
    if series.is_empty() {
        report.messages.push("warning: no data rows".to_string());
    }
    Ok(LoadedBlocks { series, report })
}

pub fn load_block_csv(path: impl AsRef<Path>) -> Result<LoadedBlocks, IngestError> {
    parse_block_csv(&read_file(path.as_ref())?)
}

/// Parses a transaction CSV document. Rows violating record invariants
/// (confirmation before arrival, zero size, negative fee) are dropped and
/// counted in the report; file order is preserved otherwise.
pub fn parse_tx_csv(bytes: &[u8]) -> Result<LoadedTxs, IngestError> {
    let mut rdr = reader(bytes);
    check_header(&mut rdr, &TX_HEADER)?;
    let mut txs = Vec::new();
    let mut report = ValidationReport::default();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        report.n_records += 1;
        if rec.len() != TX_HEADER.len() {
            return Err(IngestError::FieldCount { row: line, expected: TX_HEADER.len(), found: rec.len() });
        }
        let row = Row { record: &rec, line, header: &TX_HEADER };
        let arrival_ts: f64 = row.parse(1)?;
        let confirm_ts = if row.raw(2).trim().is_empty() { None } else { Some(row.parse::<f64>(2)?) };
        let fee: Btc = row.parse(3)?;
        let size: u64 = row.parse(4)?;
        if let Some(c) = confirm_ts {
            if c < arrival_ts {
                report.schema_error(format!("row {line}: confirm_ts {c} precedes arrival_ts {arrival_ts}; row rejected"));
                continue;
            }
        }
        if size == 0 {
            report.schema_error(format!("row {line}: size_bytes must be positive; row rejected"));
            continue;
        }
        if fee.is_negative() {
            report.schema_error(format!("row {line}: fee_btc is negative; row rejected"));
            continue;
        }
        txs.push(TxRecord { id: row.raw(0).to_string(), arrival_ts, confirm_ts, fee, size });
    }
    if report.n_records == 0 {
        report.messages.push("warning: no data rows".to_string());
    }
    Ok(LoadedTxs { txs, report })
}

pub fn load_tx_csv(path: impl AsRef<Path>) -> Result<LoadedTxs, IngestError> {
    parse_tx_csv(&read_file(path.as_ref())?)
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(w)
}

/// Writes the canonical block CSV form.
pub fn write_block_csv<W: Write>(series: &BlockSeries, w: W) -> Result<(), IngestError> {
    let mut wtr = csv_writer(w);
    wtr.write_record(BLOCK_HEADER)?;
    for b in series.blocks() {
        wtr.write_record([
            b.height.to_string(),
            b.timestamp.to_string(),
            b.miner.clone(),
            b.size.to_string(),
            b.tx_count.to_string(),
            b.avg_fee.to_string(),
            b.mempool.tx_count.to_string(),
            b.mempool.total_bytes.to_string(),
            b.mempool.total_fee.to_string(),
        ])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_tx_csv<W: Write>(txs: &[TxRecord], w: W) -> Result<(), IngestError> {
    let mut wtr = csv_writer(w);
    wtr.write_record(TX_HEADER)?;
    for t in txs {
        wtr.write_record([
            t.id.clone(),
            t.arrival_ts.to_string(),
            t.confirm_ts.map(|c| c.to_string()).unwrap_or_default(),
            t.fee.to_string(),
            t.size.to_string(),
        ])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn block_csv_bytes(series: &BlockSeries) -> Vec<u8> {
    let mut buf = Vec::new();
    write_block_csv(series, &mut buf).expect("writing to memory cannot fail");
    buf
}

pub fn tx_csv_bytes(txs: &[TxRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_tx_csv(txs, &mut buf).expect("writing to memory cannot fail");
    buf
}

pub fn save_block_csv(series: &BlockSeries, path: impl AsRef<Path>) -> Result<(), IngestError> {
    let path = path.as_ref();
    fs::write(path, block_csv_bytes(series)).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })
}

pub fn save_tx_csv(txs: &[TxRecord], path: impl AsRef<Path>) -> Result<(), IngestError> {
    let path = path.as_ref();
    fs::write(path, tx_csv_bytes(txs)).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })
}

/// Train/test/validation fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub test_frac: f64,
    pub val_frac: f64,
}

impl SplitSpec {
    pub fn new(train_frac: f64, test_frac: f64, val_frac: f64) -> Result<Self, IngestError> {
        let spec = Self { train_frac, test_frac, val_frac };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        for (name, v) in [("train", self.train_frac), ("test", self.test_frac), ("validation", self.val_frac)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(IngestError::InvalidSplit(format!("{name} fraction {v} outside [0, 1]")));
            }
        }
        let sum = self.train_frac + self.test_frac + self.val_frac;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(IngestError::InvalidSplit(format!("fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// `(train, test, validation)` row counts for a series of `m` blocks.
    ///
    /// Test and validation receive `floor(m * frac)` rows each and the
    /// training part takes the remainder, which reproduces the 70/15/15
    /// division of 80 408 blocks into 56 286 / 12 061 / 12 061.
    pub fn counts(&self, m: usize) -> (usize, usize, usize) {
        let test = ((m as f64) * self.test_frac + 1e-9).floor() as usize;
        let val = ((m as f64) * self.val_frac + 1e-9).floor() as usize;
        let test = test.min(m);
        let val = val.min(m - test);
        (m - test - val, test, val)
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_frac: 0.70, test_frac: 0.15, val_frac: 0.15 }
    }
}

/// Chronological contiguous split into `(train, test, validation)`.
pub fn split_dataset(
    series: &BlockSeries,
    spec: &SplitSpec,
) -> Result<(BlockSeries, BlockSeries, BlockSeries), IngestError> {
    spec.validate()?;
    if series.is_empty() {
        return Err(IngestError::EmptySeries);
    }
    let (train, test, _) = spec.counts(series.len());
    Ok((
        series.slice(0, train),
        series.slice(train, train + test),
        series.slice(train + test, series.len()),
    ))
}

/// Blocks whose timestamp falls on `class`; inter-block times are recomputed
/// over the retained subsequence.
pub fn filter_day_class(series: &BlockSeries, class: DayClass) -> BlockSeries {
    let blocks = series
        .blocks()
        .iter()
        .filter(|b| tag_day_class(b.timestamp) == class)
        .cloned()
        .collect();
    BlockSeries::new(blocks).expect("subsequence of an ordered series stays ordered")
}
