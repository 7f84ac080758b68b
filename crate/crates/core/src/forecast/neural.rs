//! NAR / NARX tapped-delay networks.
//!
//! One tanh hidden layer and a linear output, trained open-loop (each
//! target sees true lagged values) by Levenberg–Marquardt on
//! `Σ e² + α Σ w²` in normalised units.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_series, exog_width, ExogRows, ForecastError, Forecaster};
use crate::linalg::solve_symmetric;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub max_iterations: usize,
    /// α in the regularised objective.
    pub weight_decay: f64,
    /// Re-estimate α and the error weight from the effective number of
    /// parameters after every accepted step, instead of keeping α fixed.
    pub evidence_updates: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { seed: 0, max_iterations: 100, weight_decay: 1e-3, evidence_updates: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub iterations: usize,
    /// Regularised objective at the returned weights.
    pub objective: f64,
    /// Sum of squared errors (normalised units) at the returned weights.
    pub sse: f64,
    pub converged: bool,
    /// Final α; differs from the configured value only with evidence updates.
    pub alpha: f64,
    pub objective_trace: Vec<f64>,
}

/// Min-max map to `[-1, 1]`; a degenerate range maps everything to 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let (min, max) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Self { min, max }
    }

    fn scale(&self, v: f64) -> f64 {
        let r = self.max - self.min;
        if r > 0.0 {
            2.0 * (v - self.min) / r - 1.0
        } else {
            0.0
        }
    }

    fn unscale(&self, v: f64) -> f64 {
        let r = self.max - self.min;
        if r > 0.0 {
            (v + 1.0) * 0.5 * r + self.min
        } else {
            self.min
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralNetModel {
    /// `y_{t-1} .. y_{t-delays}` feed every prediction.
    pub delays: usize,
    /// Lags of each exogenous column; 0 for NAR.
    pub exog_delays: usize,
    pub exog_dim: usize,
    pub hidden_units: usize,
    /// Hidden-layer weights, row-major `hidden_units × inputs`.
    pub input_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
    pub y_bounds: Bounds,
    pub x_bounds: Vec<Bounds>,
    pub training_log: TrainingLog,
}

impl NeuralNetModel {
    pub fn n_inputs(&self) -> usize {
        self.delays + self.exog_delays * self.exog_dim
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Normalised input vector for predicting step `t`.
    fn inputs(&self, y: &[f64], x: Option<&ExogRows>, t: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend((1..=self.delays).map(|l| self.y_bounds.scale(y[t - l])));
        if let Some(x) = x {
            for l in 1..=self.exog_delays {
                out.extend(x[t - l].iter().zip(&self.x_bounds).map(|(v, b)| b.scale(*v)));
            }
        }
    }

    fn forward(&self, input: &[f64]) -> f64 {
        let n_in = input.len();
        let mut o = self.output_bias;
        for h in 0..self.hidden_units {
            let w = &self.input_weights[h * n_in..(h + 1) * n_in];
            let a = self.hidden_bias[h] + w.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
            o += self.output_weights[h] * a.tanh();
        }
        o
    }

    fn params(&self) -> Vec<f64> {
        let mut v = self.input_weights.clone();
        v.extend(&self.hidden_bias);
        v.extend(&self.output_weights);
        v.push(self.output_bias);
        v
    }

    fn set_params(&mut self, v: &[f64]) {
        let h = self.hidden_units;
        let nw = h * self.n_inputs();
        self.input_weights.copy_from_slice(&v[..nw]);
        self.hidden_bias.copy_from_slice(&v[nw..nw + h]);
        self.output_weights.copy_from_slice(&v[nw + h..nw + 2 * h]);
        self.output_bias = v[nw + 2 * h];
    }

    fn check_exog<'a>(&self, x: Option<&'a ExogRows>, len: usize) -> Result<Option<&'a ExogRows>, ForecastError> {
        if self.exog_dim == 0 {
            return Ok(None);
        }
        let x = x.ok_or(ForecastError::MissingExog(self.exog_dim))?;
        if x.len() < len {
            return Err(ForecastError::LengthMismatch { series: len, exog: x.len() });
        }
        if x[..len].iter().any(|r| r.len() != self.exog_dim) {
            return Err(ForecastError::MissingExog(self.exog_dim));
        }
        Ok(Some(x))
    }
}

impl Forecaster for NeuralNetModel {
    fn required_history(&self) -> usize {
        self.delays.max(self.exog_delays)
    }

    fn predict_next(&self, history: &[f64], exog: Option<&ExogRows>) -> Result<f64, ForecastError> {
        let n = history.len();
        if n < self.required_history() {
            return Err(ForecastError::InsufficientHistory { len: n, need: self.required_history() });
        }
        let x = self.check_exog(exog, n)?;
        let mut input = Vec::with_capacity(self.n_inputs());
        self.inputs(history, x, n, &mut input);
        Ok(self.y_bounds.unscale(self.forward(&input)))
    }

    fn rolling_predictions(&self, series: &[f64], exog: Option<&ExogRows>, start: usize) -> Result<Vec<f64>, ForecastError> {
        if start < self.required_history() {
            return Err(ForecastError::InsufficientHistory { len: start, need: self.required_history() });
        }
        let x = self.check_exog(exog, series.len())?;
        let mut input = Vec::with_capacity(self.n_inputs());
        Ok((start..series.len())
            .map(|t| {
                self.inputs(series, x, t, &mut input);
                self.y_bounds.unscale(self.forward(&input))
            })
            .collect())
    }
}

pub fn train_nar(series: &[f64], delays: usize, hidden_units: usize, cfg: &TrainConfig) -> Result<NeuralNetModel, ForecastError> {
    train(series, None, delays, hidden_units, cfg)
}

/// Row `i` of `exog` is observed at step `i` and feeds predictions of
/// `y_{i+1} .. y_{i+delays}`.
pub fn train_narx(
    series: &[f64],
    exog: &ExogRows,
    delays: usize,
    hidden_units: usize,
    cfg: &TrainConfig,
) -> Result<NeuralNetModel, ForecastError> {
    train(series, Some(exog), delays, hidden_units, cfg)
}

fn train(
    series: &[f64],
    exog: Option<&ExogRows>,
    delays: usize,
    hidden_units: usize,
    cfg: &TrainConfig,
) -> Result<NeuralNetModel, ForecastError> {
    check_series(series)?;
    if delays == 0 || hidden_units == 0 {
        return Err(ForecastError::InvalidOrder("delays and hidden units must be positive".into()));
    }
    if !(cfg.weight_decay >= 0.0) || !cfg.weight_decay.is_finite() {
        return Err(ForecastError::InvalidOrder("weight decay must be finite and non-negative".into()));
    }
    let n = series.len();
    if n <= delays + hidden_units {
        return Err(ForecastError::TooShort { len: n, need: delays + hidden_units });
    }
    let exog_dim = match exog {
        Some(x) => exog_width(n, x)?,
        None => 0,
    };
    if exog.is_some() && exog_dim == 0 {
        return Err(ForecastError::InvalidOrder("exogenous rows have no columns".into()));
    }
    let x_bounds: Vec<Bounds> = (0..exog_dim)
        .map(|c| Bounds::of(exog.expect("exog present").iter().map(|r| r[c])))
        .collect();
    let exog_delays = if exog_dim > 0 { delays } else { 0 };
    let n_in = delays + exog_delays * exog_dim;
    let n_params = hidden_units * (n_in + 2) + 1;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = 1.0 / (n_in as f64).sqrt();
    let mut model = NeuralNetModel {
        delays,
        exog_delays,
        exog_dim,
        hidden_units,
        input_weights: (0..hidden_units * n_in).map(|_| rng.random_range(-init..init)).collect(),
        hidden_bias: (0..hidden_units).map(|_| rng.random_range(-0.5..0.5)).collect(),
        output_weights: (0..hidden_units).map(|_| rng.random_range(-0.5..0.5)).collect(),
        output_bias: 0.0,
        y_bounds: Bounds::of(series.iter().copied()),
        x_bounds,
        training_log: TrainingLog {
            iterations: 0,
            objective: 0.0,
            sse: 0.0,
            converged: false,
            alpha: cfg.weight_decay,
            objective_trace: Vec::new(),
        },
    };

    let first = delays;
    let samples = n - first;
    let mut inputs = vec![0.0; samples * n_in];
    let mut buf = Vec::with_capacity(n_in);
    for (s, t) in (first..n).enumerate() {
        model.inputs(series, exog, t, &mut buf);
        inputs[s * n_in..(s + 1) * n_in].copy_from_slice(&buf);
    }
    let targets: Vec<f64> = series[first..].iter().map(|v| model.y_bounds.scale(*v)).collect();
    let data = Data { inputs: &inputs, targets: &targets, n_in };

    // objective = beta·sse + alpha·|w|²; beta stays 1 unless evidence updates run
    let mut alpha = cfg.weight_decay;
    let mut beta = 1.0;
    let mut w = model.params();
    let mut sse = data.sse(&model);
    let mut objective = beta * sse + alpha * sum_sq(&w);
    let mut mu = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    let mut trace = vec![objective];

    while iterations < cfg.max_iterations {
        let (jac, err) = data.jacobian(&model, n_params);
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = beta * (&jt * DVector::from_column_slice(&err)) - alpha * DVector::from_column_slice(&w);
        let mut accepted = false;
        while mu <= 1e10 {
            let mut a = beta * &jtj;
            for i in 0..n_params {
                a[(i, i)] += alpha + mu;
            }
            let Some(step) = solve_symmetric(&a, &grad) else {
                mu *= 10.0;
                continue;
            };
            let trial: Vec<f64> = w.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            model.set_params(&trial);
            let s = data.sse(&model);
            let obj = beta * s + alpha * sum_sq(&trial);
            if obj.is_finite() && obj < objective {
                let rel = (objective - obj) / objective.max(f64::MIN_POSITIVE);
                w = trial;
                sse = s;
                objective = obj;
                mu = (mu / 10.0).max(1e-20);
                accepted = true;
                converged = rel < 1e-12 || sse == 0.0;
                if cfg.evidence_updates {
                    let (a2, b2) = evidence(&jtj, alpha, beta, sse, sum_sq(&w), samples);
                    alpha = a2;
                    beta = b2;
                    objective = beta * sse + alpha * sum_sq(&w);
                }
                break;
            }
            mu *= 10.0;
        }
        model.set_params(&w);
        iterations += 1;
        trace.push(objective);
        if !accepted {
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    model.set_params(&w);
    model.training_log = TrainingLog { iterations, objective, sse, converged, alpha, objective_trace: trace };
    Ok(model)
}

struct Data<'a> {
    inputs: &'a [f64],
    targets: &'a [f64],
    n_in: usize,
}

impl Data<'_> {
    fn sse(&self, m: &NeuralNetModel) -> f64 {
        self.targets
            .iter()
            .enumerate()
            .map(|(s, y)| {
                let e = y - m.forward(&self.inputs[s * self.n_in..(s + 1) * self.n_in]);
                e * e
            })
            .sum()
    }

    /// Jacobian of the network output (rows = samples) and the errors
    /// `target - output`.
    fn jacobian(&self, m: &NeuralNetModel, n_params: usize) -> (DMatrix<f64>, Vec<f64>) {
        let n_in = self.n_in;
        let h = m.hidden_units;
        let rows = self.targets.len();
        let mut jac = DMatrix::<f64>::zeros(rows, n_params);
        let mut err = Vec::with_capacity(rows);
        let mut hidden = vec![0.0; h];
        for s in 0..rows {
            let x = &self.inputs[s * n_in..(s + 1) * n_in];
            let mut o = m.output_bias;
            for (k, hk) in hidden.iter_mut().enumerate() {
                let wk = &m.input_weights[k * n_in..(k + 1) * n_in];
                *hk = (m.hidden_bias[k] + wk.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).tanh();
                o += m.output_weights[k] * *hk;
            }
            err.push(self.targets[s] - o);
            for k in 0..h {
                let g = m.output_weights[k] * (1.0 - hidden[k] * hidden[k]);
                for i in 0..n_in {
                    jac[(s, k * n_in + i)] = g * x[i];
                }
                jac[(s, h * n_in + k)] = g;
                jac[(s, h * n_in + h + k)] = hidden[k];
            }
            jac[(s, n_params - 1)] = 1.0;
        }
        (jac, err)
    }
}

/// Evidence-framework update: effective parameter count
/// `γ = P - α·tr((βJᵀJ + αI)⁻¹)`, then `α = γ / (2|w|²)`, `β = (N - γ) / (2·sse)`.
/// Returned in the scaling where the objective is `β·sse + α·|w|²`.
fn evidence(jtj: &DMatrix<f64>, alpha: f64, beta: f64, sse: f64, ssw: f64, n: usize) -> (f64, f64) {
    let p = jtj.nrows();
    let mut h = beta * jtj;
    for i in 0..p {
        h[(i, i)] += alpha;
    }
    let Some(inv) = h.try_inverse() else {
        return (alpha, beta);
    };
    let gamma = (p as f64 - alpha * inv.trace()).clamp(0.0, p as f64);
    let a = if ssw > 0.0 { gamma / (2.0 * ssw) } else { alpha };
    let b = if sse > 0.0 { (n as f64 - gamma).max(1.0) / (2.0 * sse) } else { beta };
    if a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0 {
        // keep the objective on the unit-error scale the damping expects
        (a / b, 1.0)
    } else {
        (alpha, beta)
    }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::arima::sim::normals;
    use crate::forecast::evaluate;

    fn cfg(seed: u64) -> TrainConfig {
        TrainConfig { seed, ..TrainConfig::default() }
    }

    #[test]
    fn constant_series_predicted_exactly() {
        let s = vec![4.25; 60];
        let m = train_nar(&s, 2, 10, &cfg(1)).unwrap();
        let e = evaluate(&m, &s, None).unwrap();
        assert!(e.rmse < 1e-6);
        assert_eq!(m.predict_next(&s, None).unwrap(), 4.25);
    }

    #[test]
    fn noiseless_ar1_is_learned() {
        let mut s = vec![1.0];
        for _ in 1..300 {
            s.push(0.9 * s.last().unwrap());
        }
        let m = train_nar(&s, 1, 10, &cfg(3)).unwrap();
        // fresh trajectory inside the training range
        let mut test = vec![0.8];
        for _ in 1..50 {
            test.push(0.9 * test.last().unwrap());
        }
        let e = evaluate(&m, &test, None).unwrap();
        let mean = test.iter().sum::<f64>() / test.len() as f64;
        let sd = (test.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / test.len() as f64).sqrt();
        assert!(e.rmse < 0.01 * sd, "rmse {} sd {}", e.rmse, sd);
    }

    #[test]
    fn narx_learns_lagged_identity() {
        let x = normals(1_500, 12);
        let y: Vec<f64> = (0..x.len()).map(|i| if i == 0 { 0.0 } else { x[i - 1] }).collect();
        let rows: Vec<Vec<f64>> = x.iter().map(|v| vec![*v]).collect();
        // the default decay trades ~1e-2 of accuracy for smoothness; exact fits need less
        let m = train_narx(&y[..1_000], &rows[..1_000], 2, 10, &TrainConfig { weight_decay: 1e-6, ..cfg(5) }).unwrap();
        for t in 1_000..1_100 {
            let p = m.predict_next(&y[..t], Some(&rows[..t])).unwrap();
            assert!((p - x[t - 1]).abs() < 1e-3, "t={t} {p} vs {}", x[t - 1]);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let s = normals(400, 8);
        let a = train_nar(&s, 2, 6, &cfg(42)).unwrap();
        let b = train_nar(&s, 2, 6, &cfg(42)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
        let c = train_nar(&s, 2, 6, &cfg(43)).unwrap();
        assert_ne!(a.input_weights, c.input_weights);
    }

    #[test]
    fn log_and_shapes() {
        let s = normals(300, 2);
        let x: Vec<Vec<f64>> = normals(300, 3).chunks(1).map(|c| vec![c[0], 2.0 * c[0]]).collect();
        let m = train_narx(&s, &x, 3, 4, &TrainConfig { max_iterations: 5, ..cfg(1) }).unwrap();
        assert_eq!(m.n_inputs(), 3 + 3 * 2);
        assert_eq!(m.input_weights.len(), 4 * 9);
        assert_eq!(m.hidden_bias.len(), 4);
        assert_eq!(m.output_weights.len(), 4);
        assert!(m.training_log.iterations <= 5);
        assert_eq!(m.training_log.objective_trace.len(), m.training_log.iterations + 1);
        assert!(m.training_log.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        let back = NeuralNetModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert_eq!(m.predict_next(&s[..10], None), Err(ForecastError::MissingExog(2)));
    }

    #[test]
    fn evidence_updates_run() {
        let s = normals(300, 4);
        let m = train_nar(&s, 2, 5, &TrainConfig { evidence_updates: true, max_iterations: 20, ..cfg(2) }).unwrap();
        assert!(m.training_log.alpha > 0.0 && m.training_log.alpha.is_finite());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(train_nar(&[1.0; 5], 2, 10, &cfg(0)), Err(ForecastError::TooShort { .. })));
        assert!(train_nar(&[1.0; 50], 0, 10, &cfg(0)).is_err());
        let bad = TrainConfig { weight_decay: -1.0, ..cfg(0) };
        assert!(train_nar(&normals(50, 1), 2, 3, &bad).is_err());
    }
}
