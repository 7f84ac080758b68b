//! Analytics toolkit for Bitcoin transaction handling.
//!
//! The crate is organised as a pipeline:
//!
//! - [`model`]: shared block/transaction records and inter-block derivation
//! - [`ingest`]: CSV persistence, dataset splitting and a JSON-RPC collector
//! - [`simulate`]: a deterministic discrete-event mempool/mining simulator
//! - [`explore`]: empirical CDFs, exponential and Poisson fits, ACF/PACF,
//!   per-miner summaries and fee-quartile confirmation analysis
//! - [`forecast`]: AR/ARIMA/ARIMAX and NAR/NARX one-step forecasters
//! - [`classify`]: CART, boosted and RUSBoost miner classifiers with
//!   confusion-matrix and ROC evaluation

pub mod classify;
pub mod explore;
pub mod forecast;
pub mod ingest;
pub mod model;
pub mod simulate;

mod linalg;

pub use model::{
    BlockRecord, BlockSeries, Btc, DayClass, MempoolSnapshot, ModelError, TxRecord,
    ValidationReport,
};
