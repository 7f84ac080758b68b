//! Block collection from a Bitcoin-Core-compatible node over JSON-RPC.
//!
//! Methods used: `getblockcount`, `getblockhash`, `getblock` (verbosity 2)
//! and `getmempoolinfo`. The mempool summary is sampled when each block is
//! fetched, so it is only meaningful when collecting near the chain tip.

use std::ops::RangeInclusive;
use std::thread;
use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};
use thiserror::Error;

use crate::model::{BlockRecord, BlockSeries, Btc, MempoolSnapshot, UNKNOWN_MINER};

pub const RPC_USER_ENV: &str = "CHAINPULSE_RPC_USER";
pub const RPC_PASS_ENV: &str = "CHAINPULSE_RPC_PASS";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RpcError {
    #[error("connection refused: {0}")]
    ConnectionRefused(String),
    #[error("authentication failed")]
    Auth,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rpc error {code}: {message}")]
    Server { code: i64, message: String },
    #[error("malformed response: {0}")]
    Malformed(String),
}

impl RpcError {
    fn is_retryable(&self) -> bool {
        match self {
            RpcError::ConnectionRefused(_) | RpcError::Transport(_) => true,
            // RPC_IN_WARMUP
            RpcError::Server { code, .. } => *code == -28,
            RpcError::Auth | RpcError::Malformed(_) => false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CollectError {
    #[error("invalid height range {start}..={end}")]
    InvalidRange { start: u64, end: u64 },
    #[error("height {requested} is beyond the chain tip (tip height {tip})")]
    BeyondTip { requested: u64, tip: u64 },
    #[error("duplicate block height {0} while merging collected series")]
    DuplicateHeight(u64),
    #[error("poll interval must be positive")]
    InvalidPollInterval,
    #[error(transparent)]
    Rpc(#[from] RpcError),
}

/// A single JSON-RPC request/response exchange.
pub trait RpcTransport {
    fn call(&self, method: &str, params: &[Value]) -> Result<Value, RpcError>;
}

#[derive(Clone, PartialEq)]
pub struct NodeEndpoint {
    pub url: String,
    pub credentials: (String, String),
    /// Base delay between retries.
    pub poll_interval: Duration,
}

impl std::fmt::Debug for NodeEndpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NodeEndpoint")
            .field("url", &self.url)
            .field("user", &self.credentials.0)
            .field("poll_interval", &self.poll_interval)
            .finish()
    }
}

impl NodeEndpoint {
    pub fn new(url: impl Into<String>, user: impl Into<String>, pass: impl Into<String>, poll_interval: Duration) -> Result<Self, CollectError> {
        if poll_interval.is_zero() {
            return Err(CollectError::InvalidPollInterval);
        }
        Ok(Self { url: url.into(), credentials: (user.into(), pass.into()), poll_interval })
    }

    /// Credentials from `CHAINPULSE_RPC_USER` / `CHAINPULSE_RPC_PASS` (empty when unset).
    pub fn from_env(url: impl Into<String>, poll_interval: Duration) -> Result<Self, CollectError> {
        let user = std::env::var(RPC_USER_ENV).unwrap_or_default();
        let pass = std::env::var(RPC_PASS_ENV).unwrap_or_default();
        Self::new(url, user, pass, poll_interval)
    }
}

/// JSON-RPC 1.0 over plain HTTP with basic authentication.
pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
    auth_header: String,
}

impl HttpTransport {
    pub fn new(ep: &NodeEndpoint) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        let token = base64::engine::general_purpose::STANDARD
            .encode(format!("{}:{}", ep.credentials.0, ep.credentials.1));
        Self { agent, url: ep.url.clone(), auth_header: format!("Basic {token}") }
    }
}

impl RpcTransport for HttpTransport {
    fn call(&self, method: &str, params: &[Value]) -> Result<Value, RpcError> {
        let body = json!({"jsonrpc": "1.0", "id": "chainpulse", "method": method, "params": params});
        let resp = self
            .agent
            .post(&self.url)
            .header("Authorization", &self.auth_header)
            .header("Content-Type", "application/json")
            .send(body.to_string())
            .map_err(|e| match e {
                ureq::Error::ConnectionFailed => RpcError::ConnectionRefused(self.url.clone()),
                ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::ConnectionRefused => {
                    RpcError::ConnectionRefused(self.url.clone())
                }
                other => RpcError::Transport(other.to_string()),
            })?;
        let status = resp.status().as_u16();
        if status == 401 || status == 403 {
            return Err(RpcError::Auth);
        }
        let text = resp
            .into_body()
            .read_to_string()
            .map_err(|e| RpcError::Transport(e.to_string()))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| RpcError::Malformed(format!("http {status}: {e}")))?;
        rpc_result(v)
    }
}

/// Extracts `result` from a JSON-RPC envelope, mapping `error` objects.
fn rpc_result(v: Value) -> Result<Value, RpcError> {
    if let Some(err) = v.get("error").filter(|e| !e.is_null()) {
        return Err(RpcError::Server {
            code: err.get("code").and_then(Value::as_i64).unwrap_or(0),
            message: err.get("message").and_then(Value::as_str).unwrap_or("").to_string(),
        });
    }
    v.get("result").cloned().ok_or_else(|| RpcError::Malformed("missing result".into()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_backoff: Duration,
    pub max_backoff: Duration,
}

impl RetryPolicy {
    pub fn from_endpoint(ep: &NodeEndpoint) -> Self {
        Self { max_retries: 5, base_backoff: ep.poll_interval, max_backoff: ep.poll_interval * 32 }
    }

    fn delay(&self, attempt: u32) -> Duration {
        self.base_backoff.saturating_mul(1 << attempt.min(16)).min(self.max_backoff)
    }
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 5, base_backoff: Duration::from_millis(500), max_backoff: Duration::from_secs(30) }
    }
}

#[derive(Debug, Clone)]
pub struct CollectOutcome {
    pub series: BlockSeries,
    pub retries: usize,
    pub log: Vec<String>,
    /// Set when collection stopped early; `series` then holds the blocks fetched so far.
    pub aborted: Option<CollectError>,
}

struct Session<'a, T: RpcTransport> {
    transport: &'a T,
    policy: &'a RetryPolicy,
    retries: usize,
    log: Vec<String>,
}

impl<T: RpcTransport> Session<'_, T> {
    fn call(&mut self, method: &str, params: &[Value]) -> Result<Value, RpcError> {
        let mut attempt = 0;
        loop {
            match self.transport.call(method, params) {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && attempt < self.policy.max_retries => {
                    let delay = self.policy.delay(attempt);
                    self.log.push(format!("retry {} of {method}: {e}", attempt + 1));
                    log::warn!("retrying {method} after {delay:?}: {e}");
                    self.retries += 1;
                    attempt += 1;
                    if !delay.is_zero() {
                        thread::sleep(delay);
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn fetch_block(&mut self, height: u64) -> Result<BlockRecord, RpcError> {
        let hash = self.call("getblockhash", &[json!(height)])?;
        let block = self.call("getblock", &[hash, json!(2)])?;
        let mempool = self.call("getmempoolinfo", &[])?;
        block_from_json(height, &block, &mempool)
    }
}

/// Collects blocks `range` through an arbitrary transport.
pub fn collect_with<T: RpcTransport>(
    transport: &T,
    range: RangeInclusive<u64>,
    policy: &RetryPolicy,
) -> Result<CollectOutcome, CollectError> {
    let (start, end) = (*range.start(), *range.end());
    if start > end {
        return Err(CollectError::InvalidRange { start, end });
    }
    let mut session = Session { transport, policy, retries: 0, log: Vec::new() };
    let tip = session
        .call("getblockcount", &[])?
        .as_u64()
        .ok_or_else(|| RpcError::Malformed("getblockcount did not return an integer".into()))?;
    if start > tip {
        return Err(CollectError::BeyondTip { requested: start, tip });
    }
    if end > tip {
        return Err(CollectError::BeyondTip { requested: end, tip });
    }
    let mut blocks = Vec::new();
    let mut aborted = None;
    for h in start..=end {
        match session.fetch_block(h) {
            Ok(b) => blocks.push(b),
            Err(e) if blocks.is_empty() && matches!(e, RpcError::Auth | RpcError::ConnectionRefused(_)) => {
                return Err(e.into());
            }
            Err(e) => {
                session.log.push(format!("aborted at height {h}: {e}"));
                aborted = Some(e.into());
                break;
            }
        }
    }
    Ok(CollectOutcome {
        series: BlockSeries::new(blocks).expect("heights fetched in increasing order"),
        retries: session.retries,
        log: session.log,
        aborted,
    })
}

/// Collects blocks `range` from a live node endpoint.
pub fn collect_from_node(ep: &NodeEndpoint, range: RangeInclusive<u64>) -> Result<CollectOutcome, CollectError> {
    collect_with(&HttpTransport::new(ep), range, &RetryPolicy::from_endpoint(ep))
}

/// Merges series collected over disjoint ranges; overlapping heights are an error.
pub fn merge_series(parts: Vec<BlockSeries>) -> Result<BlockSeries, CollectError> {
    let mut all: Vec<BlockRecord> = parts.into_iter().flat_map(BlockSeries::into_blocks).collect();
    all.sort_by_key(|b| b.height);
    if let Some(w) = all.windows(2).find(|w| w[0].height == w[1].height) {
        return Err(CollectError::DuplicateHeight(w[0].height));
    }
    Ok(BlockSeries::new(all).expect("sorted unique heights"))
}

const POOL_TAGS: &[(&str, &[&str])] = &[
    ("F2Pool", &["f2pool", "七彩神仙鱼"]),
    ("AntPool", &["antpool"]),
    ("BTC.com", &["btc.com"]),
    ("Poolin", &["poolin"]),
    ("SlushPool", &["slush"]),
    ("BTC.TOP", &["btc.top"]),
    ("ViaBTC", &["viabtc"]),
    ("Huobi", &["huobi"]),
    ("Binance", &["binance"]),
    ("Foundry", &["foundry"]),
    ("OKExPool", &["okex"]),
    ("1THash", &["1thash"]),
];

/// Identifies a pool from the coinbase script tag, `"?"` if unrecognised.
fn miner_from_coinbase(hex: &str) -> String {
    let bytes: Vec<u8> = (0..hex.len() / 2)
        .filter_map(|i| u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).ok())
        .collect();
    let text = String::from_utf8_lossy(&bytes).to_lowercase();
    POOL_TAGS
        .iter()
        .find(|(_, tags)| tags.iter().any(|t| text.contains(t)))
        .map(|(name, _)| name.to_string())
        .unwrap_or_else(|| UNKNOWN_MINER.to_string())
}

fn block_from_json(height: u64, block: &Value, mempool: &Value) -> Result<BlockRecord, RpcError> {
    let field = |v: &Value, k: &str| -> Result<i64, RpcError> {
        v.get(k).and_then(Value::as_i64).ok_or_else(|| RpcError::Malformed(format!("missing integer field {k}")))
    };
    let timestamp = field(block, "time")?;
    let size = field(block, "size")?;
    let txs = block.get("tx").and_then(Value::as_array);
    let tx_count = match block.get("nTx").and_then(Value::as_i64) {
        Some(n) => n,
        None => txs.map(|t| t.len() as i64).unwrap_or(0),
    };
    let mut miner = UNKNOWN_MINER.to_string();
    let mut fee_sum = Btc::ZERO.sats();
    let mut fee_n = 0i64;
    if let Some(txs) = txs {
        for tx in txs {
            let coinbase = tx
                .get("vin")
                .and_then(Value::as_array)
                .and_then(|vin| vin.first())
                .and_then(|i| i.get("coinbase"))
                .and_then(Value::as_str);
            if let Some(cb) = coinbase {
                miner = miner_from_coinbase(cb);
            } else if let Some(fee) = tx.get("fee").and_then(Value::as_f64) {
                fee_sum += Btc::from_btc_f64(fee).sats();
                fee_n += 1;
            }
        }
    }
    let avg_fee = if fee_n > 0 { Btc::from_sats((fee_sum as f64 / fee_n as f64).round() as i64) } else { Btc::ZERO };
    let total_fee = mempool.get("total_fee").and_then(Value::as_f64).map(Btc::from_btc_f64).unwrap_or(Btc::ZERO);
    Ok(BlockRecord {
        height,
        timestamp,
        miner,
        size,
        tx_count,
        avg_fee,
        mempool: MempoolSnapshot { tx_count: field(mempool, "size")?, total_bytes: field(mempool, "bytes")?, total_fee },
    })
}
