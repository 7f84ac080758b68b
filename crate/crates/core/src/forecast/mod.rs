//! One-step-ahead forecasting of block attributes.
//!
//! Linear models ([`ArimaModel`]) cover AR, ARIMA and regression with ARMA
//! errors (ARIMAX); [`NeuralNetModel`] covers NAR and NARX tapped-delay
//! networks. Every forecaster predicts `y_n` from observed history
//! `y_0..y_{n-1}` (and exogenous rows `x_0..x_{n-1}`), so evaluation is a
//! rolling origin over true values, never a recursive multi-step forecast.

mod arima;
mod neural;
mod report;

pub use arima::{fit_ar, fit_arima, fit_arimax, suggest_orders, ArimaModel, OrderSuggestion};
pub use neural::{train_nar, train_narx, Bounds, NeuralNetModel, TrainConfig, TrainingLog};
pub use report::{ForecastTable, Scope, Target};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exogenous regressors, one row per time step.
pub type ExogRows = [Vec<f64>];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForecastError {
    #[error("series of length {len} is too short (need more than {need})")]
    TooShort { len: usize, need: usize },
    #[error("series has zero variance; the autocorrelation system is singular")]
    Singular,
    #[error("invalid model orders: {0}")]
    InvalidOrder(String),
    #[error("exogenous rows ({exog}) do not match series length ({series})")]
    LengthMismatch { series: usize, exog: usize },
    #[error("exogenous rows have inconsistent width")]
    RaggedExog,
    #[error("model expects exogenous input of width {0}")]
    MissingExog(usize),
    #[error("history of length {len} is shorter than the {need} values required")]
    InsufficientHistory { len: usize, need: usize },
    #[error("no points to evaluate after warm-up")]
    EmptyTest,
    #[error("series contains non-finite values")]
    NotFinite,
}

/// A model producing one-step-ahead predictions from observed history.
pub trait Forecaster {
    /// Minimum history length accepted by [`Forecaster::predict_next`].
    fn required_history(&self) -> usize;

    /// Predicts the value following `history`. `exog`, when the model uses
    /// it, must have one row per history value.
    fn predict_next(&self, history: &[f64], exog: Option<&ExogRows>) -> Result<f64, ForecastError>;

    /// Predictions for every `t` in `start..series.len()`, each using only
    /// `series[..t]` and `exog[..t]`.
    fn rolling_predictions(&self, series: &[f64], exog: Option<&ExogRows>, start: usize) -> Result<Vec<f64>, ForecastError> {
        (start..series.len())
            .map(|t| self.predict_next(&series[..t], exog.map(|x| &x[..t])))
            .collect()
    }
}

/// Single prediction from observed history; see [`Forecaster::predict_next`].
pub fn forecast_one_step<F: Forecaster + ?Sized>(model: &F, history: &[f64], exog: Option<&ExogRows>) -> Result<f64, ForecastError> {
    model.predict_next(history, exog)
}

/// Constant predictor at the training mean; the unpredictability yardstick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanBaseline {
    pub mean: f64,
}

pub fn naive_mean_baseline(train: &[f64]) -> Result<MeanBaseline, ForecastError> {
    if train.is_empty() {
        return Err(ForecastError::TooShort { len: 0, need: 0 });
    }
    Ok(MeanBaseline { mean: train.iter().sum::<f64>() / train.len() as f64 })
}

impl Forecaster for MeanBaseline {
    fn required_history(&self) -> usize {
        0
    }

    fn predict_next(&self, _history: &[f64], _exog: Option<&ExogRows>) -> Result<f64, ForecastError> {
        Ok(self.mean)
    }
}

/// Dispatch over every model kind, for heterogeneous model lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnyModel {
    Arima(ArimaModel),
    Neural(NeuralNetModel),
    Mean(MeanBaseline),
}

impl AnyModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

impl Forecaster for AnyModel {
    fn required_history(&self) -> usize {
        match self {
            AnyModel::Arima(m) => m.required_history(),
            AnyModel::Neural(m) => m.required_history(),
            AnyModel::Mean(m) => m.required_history(),
        }
    }

    fn predict_next(&self, history: &[f64], exog: Option<&ExogRows>) -> Result<f64, ForecastError> {
        match self {
            AnyModel::Arima(m) => m.predict_next(history, exog),
            AnyModel::Neural(m) => m.predict_next(history, exog),
            AnyModel::Mean(m) => m.predict_next(history, exog),
        }
    }

    fn rolling_predictions(&self, series: &[f64], exog: Option<&ExogRows>, start: usize) -> Result<Vec<f64>, ForecastError> {
        match self {
            AnyModel::Arima(m) => m.rolling_predictions(series, exog, start),
            AnyModel::Neural(m) => m.rolling_predictions(series, exog, start),
            AnyModel::Mean(m) => m.rolling_predictions(series, exog, start),
        }
    }
}

/// Error metrics over rolling one-step predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastEvaluation {
    pub mae: f64,
    pub rmse: f64,
    pub n: usize,
    /// `e_i = y_i - prediction_i`.
    pub residuals: Vec<f64>,
}

impl ForecastEvaluation {
    pub fn from_residuals(residuals: Vec<f64>) -> Result<Self, ForecastError> {
        if residuals.is_empty() {
            return Err(ForecastError::EmptyTest);
        }
        let n = residuals.len() as f64;
        let mae = residuals.iter().map(|e| e.abs()).sum::<f64>() / n;
        let rmse = (residuals.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
        Ok(Self { mae, rmse, n: residuals.len(), residuals })
    }
}

/// Rolling one-step evaluation over `series`, warming up on its first
/// `model.required_history()` values.
pub fn evaluate<F: Forecaster + ?Sized>(model: &F, series: &[f64], exog: Option<&ExogRows>) -> Result<ForecastEvaluation, ForecastError> {
    evaluate_from(model, series, exog, model.required_history())
}

/// Rolling one-step evaluation of `series[start..]`; earlier values only
/// serve as history (e.g. the tail of the training span).
pub fn evaluate_from<F: Forecaster + ?Sized>(
    model: &F,
    series: &[f64],
    exog: Option<&ExogRows>,
    start: usize,
) -> Result<ForecastEvaluation, ForecastError> {
    let start = start.max(model.required_history());
    if start >= series.len() {
        return Err(ForecastError::EmptyTest);
    }
    if let Some(x) = exog {
        if x.len() != series.len() {
            return Err(ForecastError::LengthMismatch { series: series.len(), exog: x.len() });
        }
    }
    let preds = model.rolling_predictions(series, exog, start)?;
    ForecastEvaluation::from_residuals(series[start..].iter().zip(&preds).map(|(y, p)| y - p).collect())
}

fn check_series(series: &[f64]) -> Result<(), ForecastError> {
    if series.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ForecastError::NotFinite)
    }
}

fn exog_width(series_len: usize, exog: &ExogRows) -> Result<usize, ForecastError> {
    if exog.len() != series_len {
        return Err(ForecastError::LengthMismatch { series: series_len, exog: exog.len() });
    }
    let k = exog.first().map_or(0, Vec::len);
    if exog.iter().any(|r| r.len() != k) {
        return Err(ForecastError::RaggedExog);
    }
    if exog.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ForecastError::NotFinite);
    }
    Ok(k)
}
