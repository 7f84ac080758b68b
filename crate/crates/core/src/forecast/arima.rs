//! AR, ARIMA and ARIMAX (regression with ARIMA errors).
//!
//! Parameterisation, with `w = ∇^d y` and `z = ∇^d x'` where `x'_i = x_{i-1}`:
//!
//! ```text
//! w_i = μ + β·z_i + u_i,   u_i = Σ φ_k u_{i-k} + ε_i + Σ θ_k ε_{i-k}
//! ```
//!
//! so `intercept` is the mean level of the (differenced) series. The
//! conditional sum of squares sets `ε_i = 0` for the first `p` working
//! points.

use serde::{Deserialize, Serialize};

use super::{check_series, exog_width, ExogRows, ForecastError, Forecaster};
use crate::explore;
use crate::linalg::{companion_radius, durbin_levinson, least_squares_svd, solve_symmetric};
use nalgebra::{DMatrix, DVector};

const MAX_ITERATIONS: usize = 500;
const REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    /// φ_1..φ_p.
    pub ar: Vec<f64>,
    /// θ_1..θ_q.
    pub ma: Vec<f64>,
    pub intercept: f64,
    /// β, one per exogenous column; empty without exogenous input.
    pub exog_coeffs: Vec<f64>,
    pub noise_variance: f64,
    pub fitted_on: String,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl ArimaModel {
    /// Attaches a series identifier.
    pub fn labelled(mut self, name: impl Into<String>) -> Self {
        self.fitted_on = name.into();
        self
    }

    pub fn is_stationary(&self) -> bool {
        companion_radius(&self.ar) < 1.0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    fn k(&self) -> usize {
        self.exog_coeffs.len()
    }

    /// One-step predictions for `t in start..end`, each from `y[..t]` and
    /// `exog[..t]`. Requires `end <= y.len() + 1`.
    fn predict_span(&self, y: &[f64], exog: Option<&ExogRows>, start: usize, end: usize) -> Result<Vec<f64>, ForecastError> {
        let need = self.required_history();
        if start < need {
            return Err(ForecastError::InsufficientHistory { len: start, need });
        }
        if start >= end {
            return Ok(Vec::new());
        }
        check_series(y)?;
        let k = self.k();
        let xlag = if k > 0 {
            let x = exog.ok_or(ForecastError::MissingExog(k))?;
            if x.len() + 1 < end {
                return Err(ForecastError::LengthMismatch { series: end - 1, exog: x.len() });
            }
            let x = &x[..end - 1];
            if exog_width(x.len(), x)? != k {
                return Err(ForecastError::MissingExog(k));
            }
            Some(lagged_exog(x, end))
        } else {
            None
        };
        let d = self.d;
        let w = difference(&y[..end - 1], d);
        let z = xlag.map(|x| difference_rows(&x, d));
        // working index j corresponds to original index j + d
        let m = w.len();
        let mut u = vec![0.0; m];
        for j in 0..m {
            u[j] = w[j] - self.intercept - z.as_ref().map_or(0.0, |z| dot(&self.exog_coeffs, &z[j]));
        }
        let eps = innovations(&u, &self.ar, &self.ma);
        let binom = signed_binomials(d);
        let mut out = Vec::with_capacity(end - start);
        for t in start..end {
            let j = t - d;
            let mut pred = self.intercept + z.as_ref().map_or(0.0, |z| dot(&self.exog_coeffs, &z[j]));
            for (l, phi) in self.ar.iter().enumerate() {
                pred += phi * u[j - l - 1];
            }
            for (l, theta) in self.ma.iter().enumerate() {
                if j > l {
                    pred += theta * eps[j - l - 1];
                }
            }
            for (i, c) in binom.iter().enumerate() {
                pred -= c * y[t - i - 1];
            }
            out.push(pred);
        }
        Ok(out)
    }
}

impl Forecaster for ArimaModel {
    fn required_history(&self) -> usize {
        let exog_need = if self.k() > 0 { self.d + 1 } else { 0 };
        (self.p + self.d).max(exog_need)
    }

    fn predict_next(&self, history: &[f64], exog: Option<&ExogRows>) -> Result<f64, ForecastError> {
        let n = history.len();
        if n < self.required_history() {
            return Err(ForecastError::InsufficientHistory { len: n, need: self.required_history() });
        }
        if let Some(x) = exog.filter(|_| self.k() > 0) {
            if x.len() != n {
                return Err(ForecastError::LengthMismatch { series: n, exog: x.len() });
            }
        }
        Ok(self.predict_span(history, exog, n, n + 1)?[0])
    }

    fn rolling_predictions(&self, series: &[f64], exog: Option<&ExogRows>, start: usize) -> Result<Vec<f64>, ForecastError> {
        self.predict_span(series, exog, start, series.len())
    }
}

/// Yule–Walker AR(p) on the demeaned series; `intercept` is the sample mean.
pub fn fit_ar(series: &[f64], p: usize) -> Result<ArimaModel, ForecastError> {
    check_series(series)?;
    if series.len() <= p + 1 {
        return Err(ForecastError::TooShort { len: series.len(), need: p + 1 });
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let c = explore::autocovariances(series, p);
    if !(c[0] > f64::EPSILON * mean.abs().max(1.0).powi(2)) {
        return Err(ForecastError::Singular);
    }
    let r: Vec<f64> = c.iter().map(|v| v / c[0]).collect();
    let (ar, _, ratio) = durbin_levinson(&r, p).ok_or(ForecastError::Singular)?;
    let mut model = ArimaModel {
        p,
        d: 0,
        q: 0,
        ar,
        ma: Vec::new(),
        intercept: mean,
        exog_coeffs: Vec::new(),
        noise_variance: (c[0] * ratio).max(0.0),
        fitted_on: String::new(),
        converged: true,
        iterations: 0,
        warnings: Vec::new(),
    };
    stationarity_warning(&mut model);
    Ok(model)
}

/// ARIMA(p, d, q) by conditional sum of squares.
pub fn fit_arima(series: &[f64], p: usize, d: usize, q: usize) -> Result<ArimaModel, ForecastError> {
    fit_css(series, None, p, d, q)
}

/// Regression on lagged exogenous rows with ARIMA(p, d, q) errors. Row `i`
/// of `exog` holds the regressors observed at step `i`; they enter the
/// equation for `y_{i+1}`.
pub fn fit_arimax(series: &[f64], exog: &ExogRows, p: usize, d: usize, q: usize) -> Result<ArimaModel, ForecastError> {
    fit_css(series, Some(exog), p, d, q)
}

fn fit_css(series: &[f64], exog: Option<&ExogRows>, p: usize, d: usize, q: usize) -> Result<ArimaModel, ForecastError> {
    check_series(series)?;
    let n = series.len();
    if n <= p + q + d + 1 {
        return Err(ForecastError::TooShort { len: n, need: p + q + d + 1 });
    }
    let k = match exog {
        Some(x) => exog_width(n, x)?,
        None => 0,
    };
    if exog.is_some() && k == 0 {
        return Err(ForecastError::InvalidOrder("exogenous rows have no columns".into()));
    }
    let w = difference(series, d);
    let z: Vec<Vec<f64>> = match exog {
        Some(x) => difference_rows(&lagged_exog(x, n), d),
        None => vec![Vec::new(); w.len()],
    };
    let mut warnings = Vec::new();

    // regression start values; the SVD solve gives degenerate columns a zero share
    let rows: Vec<Vec<f64>> = z
        .iter()
        .map(|zi| std::iter::once(1.0).chain(zi.iter().copied()).collect())
        .collect();
    let (mut reg, rank) = least_squares_svd(&rows, &w).unwrap_or((vec![0.0; k + 1], 0));
    if rank < k + 1 && k > 0 {
        warnings.push(format!("exogenous design is rank deficient (rank {} of {})", rank.saturating_sub(1), k));
    }
    if reg.len() != k + 1 {
        reg = vec![0.0; k + 1];
    }
    let u0: Vec<f64> = w.iter().zip(&z).map(|(wi, zi)| wi - reg[0] - dot(&reg[1..], zi)).collect();
    let (ar0, ma0) = hannan_rissanen(&u0, p, q);

    let problem = Css { w: &w, z: &z, p, q, k };
    let mut params: Vec<f64> = reg.into_iter().chain(ar0).chain(ma0).collect();
    let (eps, jac) = problem.residuals(&params, true);
    let mut sse = sum_sq(&eps);
    let mut jac = jac.expect("jacobian requested");
    let mut eps = eps;
    let np = params.len();
    let mut lambda = 1e-3;
    let mut converged = sse == 0.0;
    let mut iterations = 0;

    while !converged && iterations < MAX_ITERATIONS {
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * DVector::from_column_slice(&eps);
        let floor = 1e-9 * (0..np).map(|i| jtj[(i, i)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..np {
                a[(i, i)] += lambda * (jtj[(i, i)] + floor);
            }
            let Some(step) = solve_symmetric(&a, &(-&grad)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = params.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let (e, _) = problem.residuals(&trial, false);
            let s = sum_sq(&e);
            if s.is_finite() && s < sse {
                let rel = (sse - s) / sse;
                params = trial;
                sse = s;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                converged = rel < REL_TOL || sse == 0.0;
                break;
            }
            lambda *= 10.0;
        }
        iterations += 1;
        if !accepted {
            // no downhill step at any damping: a stationary point
            converged = true;
            break;
        }
        let (e, j) = problem.residuals(&params, true);
        eps = e;
        jac = j.expect("jacobian requested");
    }
    if !converged {
        warnings.push(format!("did not converge within {MAX_ITERATIONS} iterations"));
    }
    let n_eff = w.len().saturating_sub(p).max(1);
    let mut model = ArimaModel {
        p,
        d,
        q,
        intercept: params[0],
        exog_coeffs: params[1..=k].to_vec(),
        ar: params[k + 1..k + 1 + p].to_vec(),
        ma: params[k + 1 + p..].to_vec(),
        noise_variance: sse / n_eff as f64,
        fitted_on: String::new(),
        converged,
        iterations,
        warnings,
    };
    stationarity_warning(&mut model);
    if companion_radius(&model.ma.iter().map(|t| -t).collect::<Vec<_>>()) >= 1.0 {
        model.warnings.push("MA polynomial is not invertible".into());
    }
    Ok(model)
}

struct Css<'a> {
    w: &'a [f64],
    z: &'a [Vec<f64>],
    p: usize,
    q: usize,
    k: usize,
}

impl Css<'_> {
    /// Innovations for working points `p..`, plus their Jacobian with
    /// respect to `[μ, β, φ, θ]` when requested.
    fn residuals(&self, params: &[f64], want_jac: bool) -> (Vec<f64>, Option<DMatrix<f64>>) {
        let (p, q, k) = (self.p, self.q, self.k);
        let mu = params[0];
        let beta = &params[1..=k];
        let phi = &params[k + 1..k + 1 + p];
        let theta = &params[k + 1 + p..];
        let m = self.w.len();
        let np = params.len();
        let u: Vec<f64> = (0..m).map(|j| self.w[j] - mu - dot(beta, &self.z[j])).collect();
        let eps = innovations(&u, phi, theta);
        if !want_jac {
            return (eps[p..].to_vec(), None);
        }
        // de[j][c] = d eps_j / d param_c, zero before the first innovation
        let mut de = vec![0.0; m * np];
        let sum_phi: f64 = phi.iter().sum();
        for j in p..m {
            let (head, row) = de.split_at_mut(j * np);
            let row = &mut row[..np];
            row[0] = -1.0 + sum_phi;
            for c in 0..k {
                let mut v = -self.z[j][c];
                for (l, f) in phi.iter().enumerate() {
                    v += f * self.z[j - l - 1][c];
                }
                row[1 + c] = v;
            }
            for l in 0..p {
                row[k + 1 + l] = -u[j - l - 1];
            }
            for l in 0..q {
                row[k + 1 + p + l] = if j > l { -eps[j - l - 1] } else { 0.0 };
            }
            for (l, t) in theta.iter().enumerate() {
                if j > l && j - l - 1 >= p {
                    let prev = &head[(j - l - 1) * np..(j - l) * np];
                    for c in 0..np {
                        row[c] -= t * prev[c];
                    }
                }
            }
        }
        let rows = m - p;
        let jac = DMatrix::from_row_slice(rows, np, &de[p * np..]);
        (eps[p..].to_vec(), Some(jac))
    }
}

/// `ε_j = u_j - Σ φ u_{j-l} - Σ θ ε_{j-l}` for `j >= p`, zero before.
fn innovations(u: &[f64], phi: &[f64], theta: &[f64]) -> Vec<f64> {
    let p = phi.len();
    let mut eps = vec![0.0; u.len()];
    for j in p..u.len() {
        let mut e = u[j];
        for (l, f) in phi.iter().enumerate() {
            e -= f * u[j - l - 1];
        }
        for (l, t) in theta.iter().enumerate() {
            if j > l {
                e -= t * eps[j - l - 1];
            }
        }
        eps[j] = e;
    }
    eps
}

/// Two-stage start values: a long autoregression supplies proxy
/// innovations, then `u` is regressed on its own lags and those proxies.
fn hannan_rissanen(u: &[f64], p: usize, q: usize) -> (Vec<f64>, Vec<f64>) {
    let zeros = (vec![0.0; p], vec![0.0; q]);
    if p + q == 0 {
        return zeros;
    }
    let n = u.len();
    let long = if q == 0 { 0 } else { (2 * (p + q)).max(10).min(n / 4) };
    let mut proxy = vec![0.0; n];
    if q > 0 {
        let c = explore::autocovariances(u, long);
        if c[0] <= 0.0 {
            return zeros;
        }
        let r: Vec<f64> = c.iter().map(|v| v / c[0]).collect();
        let Some((a, _, _)) = durbin_levinson(&r, long) else {
            return zeros;
        };
        for j in long..n {
            proxy[j] = u[j] - a.iter().enumerate().map(|(l, al)| al * u[j - l - 1]).sum::<f64>();
        }
    }
    let first = (long + q).max(p);
    if n <= first + p + q + 1 {
        return zeros;
    }
    let rows: Vec<Vec<f64>> = (first..n)
        .map(|j| (1..=p).map(|l| u[j - l]).chain((1..=q).map(|l| proxy[j - l])).collect())
        .collect();
    match least_squares_svd(&rows, &u[first..]) {
        Some((b, _)) => {
            let (mut ar, mut ma) = (b[..p].to_vec(), b[p..].to_vec());
            if companion_radius(&ar) >= 1.0 {
                ar = vec![0.0; p];
            }
            if companion_radius(&ma.iter().map(|t| -t).collect::<Vec<_>>()) >= 1.0 {
                ma = vec![0.0; q];
            }
            (ar, ma)
        }
        None => zeros,
    }
}

fn stationarity_warning(model: &mut ArimaModel) {
    if !model.is_stationary() {
        model.warnings.push("AR polynomial has a root on or inside the unit circle".into());
    }
}

/// `x'_i = x_{i-1}` for `i in 0..len`, with `x'_0 = x_0`.
fn lagged_exog(x: &ExogRows, len: usize) -> Vec<Vec<f64>> {
    (0..len).map(|i| x[i.saturating_sub(1)].clone()).collect()
}

/// `∇^d v`, dropping the first `d` points.
fn difference(v: &[f64], d: usize) -> Vec<f64> {
    let mut out = v.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    out
}

fn difference_rows(rows: &[Vec<f64>], d: usize) -> Vec<Vec<f64>> {
    let mut out = rows.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect()).collect();
    }
    out
}

/// Coefficients `c_i` (for lags `1..=d`) of `∇^d y_t = y_t + Σ c_i y_{t-i}`.
fn signed_binomials(d: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(d);
    let mut b = 1.0;
    for i in 1..=d {
        b = b * (d + 1 - i) as f64 / i as f64;
        c.push(if i % 2 == 1 { -b } else { b });
    }
    c
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Cutoff-based order hint: `p` is the number of leading partial
/// autocorrelations outside the white-noise band, `q` the same for the
/// autocorrelations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSuggestion {
    pub p: usize,
    pub q: usize,
    pub acf: Vec<f64>,
    pub pacf: Vec<f64>,
    pub band: f64,
}

pub fn suggest_orders(series: &[f64], max_lag: usize) -> Result<OrderSuggestion, ForecastError> {
    let map = |e: explore::ExploreError| match e {
        explore::ExploreError::ZeroVariance => ForecastError::Singular,
        explore::ExploreError::NotFinite { .. } => ForecastError::NotFinite,
        _ => ForecastError::TooShort { len: series.len(), need: max_lag },
    };
    let a = explore::acf(series, max_lag).map_err(map)?;
    let pa = explore::pacf(series, max_lag).map_err(map)?;
    let cutoff = |v: &[f64]| v[1..].iter().take_while(|x| x.abs() > a.confidence_band).count();
    Ok(OrderSuggestion { p: cutoff(&pa.values), q: cutoff(&a.values), acf: a.values.clone(), pacf: pa.values, band: a.confidence_band })
}


#[cfg(test)]
mod tests {
    use super::sim::{arma, normals};
    use super::*;
    use crate::forecast::evaluate;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn yule_walker_ar1_identity() {
        let s = arma(&[0.6], &[], 20_000, 1);
        let c = explore::autocovariances(&s, 1);
        let m = fit_ar(&s, 1).unwrap();
        assert!((m.ar[0] - c[1] / c[0]).abs() < 1e-12);
        assert!((m.ar[0] - 0.6).abs() < 0.03);
    }

    #[test]
    fn ar2_recovery() {
        let s = arma(&[0.5, -0.3], &[], 10_000, 7);
        let m = fit_ar(&s, 2).unwrap();
        assert!(close(&m.ar, &[0.5, -0.3], 0.05), "{:?}", m.ar);
        assert!(m.warnings.is_empty());
    }

    #[test]
    fn constant_series_is_singular() {
        assert_eq!(fit_ar(&[3.0; 50], 2), Err(ForecastError::Singular));
        assert!(matches!(fit_ar(&[1.0, 2.0], 1), Err(ForecastError::TooShort { .. })));
    }

    #[test]
    fn intercept_only_forecasts_mean() {
        let s = [1.0, 4.0, 2.0, 7.0, 6.0];
        let m = fit_arima(&s, 0, 0, 0).unwrap();
        assert!((m.intercept - 4.0).abs() < 1e-12);
        assert!(m.converged);
        assert!((m.predict_next(&s, None).unwrap() - 4.0).abs() < 1e-12);
        assert!((m.predict_next(&[], None).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn ar1_forecast_by_hand() {
        let m = ArimaModel {
            p: 1,
            d: 0,
            q: 0,
            ar: vec![0.5],
            ma: vec![],
            intercept: 0.0,
            exog_coeffs: vec![],
            noise_variance: 1.0,
            fitted_on: String::new(),
            converged: true,
            iterations: 0,
            warnings: vec![],
        };
        assert_eq!(m.predict_next(&[7.0, 2.0], None).unwrap(), 1.0);
        assert_eq!(
            m.predict_next(&[], None),
            Err(ForecastError::InsufficientHistory { len: 0, need: 1 })
        );
    }

    #[test]
    fn arma22_recovery_single_seed() {
        let s = arma(&[0.4, 0.2], &[0.3, -0.2], 10_000, 3);
        let m = fit_arima(&s, 2, 0, 2).unwrap();
        assert!(m.converged, "{:?}", m.warnings);
        assert!(close(&m.ar, &[0.4, 0.2], 0.15) && close(&m.ma, &[0.3, -0.2], 0.15), "{m:?}");
        assert!((m.noise_variance - 1.0).abs() < 0.05);
    }

    #[test]
    fn arma11_recovery() {
        let s = arma(&[0.6], &[0.3], 10_000, 11);
        let m = fit_arima(&s, 1, 0, 1).unwrap();
        assert!((m.ar[0] - 0.6).abs() < 0.05 && (m.ma[0] - 0.3).abs() < 0.05, "{m:?}");
    }

    #[test]
    fn differencing_kills_linear_trend() {
        let s: Vec<f64> = (0..200).map(|i| 5.0 + 0.25 * i as f64).collect();
        let m = fit_arima(&s, 1, 1, 0).unwrap();
        assert!(m.noise_variance < 1e-20);
        assert!((m.intercept - 0.25).abs() < 1e-12);
        let next = m.predict_next(&s, None).unwrap();
        assert!((next - (5.0 + 0.25 * 200.0)).abs() < 1e-9);
    }

    #[test]
    fn second_difference_undone() {
        let s: Vec<f64> = (0..100).map(|i| (i * i) as f64).collect();
        let m = fit_arima(&s, 0, 2, 0).unwrap();
        assert!((m.intercept - 2.0).abs() < 1e-9);
        assert!((m.predict_next(&s, None).unwrap() - 10_000.0).abs() < 1e-6);
        assert_eq!(m.required_history(), 2);
    }

    #[test]
    fn planted_exogenous_coefficient() {
        let x = normals(10_000, 5);
        let noise = normals(10_000, 6);
        let y: Vec<f64> = (0..10_000).map(|i| if i == 0 { 0.0 } else { 2.0 * x[i - 1] } + 0.5 * noise[i]).collect();
        let rows: Vec<Vec<f64>> = x.iter().map(|v| vec![*v]).collect();
        let m = fit_arimax(&y, &rows, 1, 0, 0).unwrap();
        assert!((m.exog_coeffs[0] - 2.0).abs() < 0.1, "{m:?}");
        assert!(m.ar[0].abs() < 0.05);
    }

    #[test]
    fn zero_exog_column_matches_arima() {
        let s = arma(&[0.5], &[0.2], 2_000, 9);
        let zero = vec![vec![0.0]; s.len()];
        let a = fit_arima(&s, 1, 0, 1).unwrap();
        let b = fit_arimax(&s, &zero, 1, 0, 1).unwrap();
        assert!(b.exog_coeffs[0].abs() < 1e-12);
        assert!((a.intercept - b.intercept).abs() < 1e-6);
        assert!(close(&a.ar, &b.ar, 1e-6) && close(&a.ma, &b.ma, 1e-6));
        assert!(b.warnings.iter().any(|w| w.contains("rank")));
    }

    #[test]
    fn duplicated_exog_column_warns() {
        let x = normals(500, 2);
        let y = normals(500, 3);
        let rows: Vec<Vec<f64>> = x.iter().map(|v| vec![*v, *v]).collect();
        let m = fit_arimax(&y, &rows, 0, 0, 0).unwrap();
        assert!(m.warnings.iter().any(|w| w.contains("rank deficient")));
        let wrong: Vec<Vec<f64>> = rows[..499].to_vec();
        assert!(matches!(fit_arimax(&y, &wrong, 0, 0, 0), Err(ForecastError::LengthMismatch { .. })));
    }

    #[test]
    fn rolling_matches_prefix_prediction() {
        let s = arma(&[0.5, 0.1], &[0.4], 400, 21);
        let x = normals(400, 22);
        let rows: Vec<Vec<f64>> = x.iter().map(|v| vec![*v]).collect();
        let m = fit_arimax(&s, &rows, 2, 1, 1).unwrap();
        let rolled = m.rolling_predictions(&s, Some(&rows), 300).unwrap();
        for (i, t) in (300..400).enumerate() {
            let single = m.predict_next(&s[..t], Some(&rows[..t])).unwrap();
            assert!((single - rolled[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn nonstationary_ar_warns() {
        let s: Vec<f64> = (0..300).map(|i| 1.02f64.powi(i)).collect();
        let m = fit_arima(&s, 1, 0, 0).unwrap();
        assert!(m.ar[0] > 1.0);
        assert!(m.warnings.iter().any(|w| w.contains("unit circle")));
    }

    #[test]
    fn ramp_beats_baseline() {
        let ramp: Vec<f64> = (0..500).map(|i| (i % 100) as f64).collect();
        let m = fit_ar(&ramp[..350], 1).unwrap();
        let base = crate::forecast::naive_mean_baseline(&ramp[..350]).unwrap();
        let e = crate::forecast::evaluate_from(&m, &ramp, None, 350).unwrap();
        let b = crate::forecast::evaluate_from(&base, &ramp, None, 350).unwrap();
        assert!(e.rmse < 0.5 * b.rmse, "{} vs {}", e.rmse, b.rmse);
    }

    #[test]
    fn json_roundtrip_full_precision() {
        let s = arma(&[0.3], &[], 300, 4);
        let m = fit_arima(&s, 1, 0, 0).unwrap().labelled("sizes");
        let back = ArimaModel::from_json(&m.to_json()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn order_hint_for_ar2() {
        let s = arma(&[0.5, 0.3], &[], 5_000, 8);
        let o = suggest_orders(&s, 10).unwrap();
        assert_eq!(o.p, 2);
        assert!(o.q >= 3);
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(fit_arima(&[1.0, 2.0, 3.0], 1, 0, 1), Err(ForecastError::TooShort { .. })));
        assert_eq!(fit_arima(&[1.0, f64::NAN, 2.0, 3.0], 0, 0, 0), Err(ForecastError::NotFinite));
        let m = fit_arimax(&normals(50, 1), &vec![vec![1.0]; 50], 0, 0, 0).unwrap();
        assert_eq!(m.predict_next(&[1.0], None), Err(ForecastError::MissingExog(1)));
        assert!(evaluate(&m, &[1.0], Some(&[vec![1.0]])).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn shift_changes_only_intercept(seed in 0u64..1000, c in -50.0f64..50.0) {
            let s = arma(&[0.5], &[0.3], 600, seed);
            let shifted: Vec<f64> = s.iter().map(|v| v + c).collect();
            let a = fit_arima(&s, 1, 0, 1).unwrap();
            let b = fit_arima(&shifted, 1, 0, 1).unwrap();
            prop_assert!(close(&a.ar, &b.ar, 1e-6) && close(&a.ma, &b.ma, 1e-6));
            prop_assert!((b.intercept - a.intercept - c).abs() < 1e-6);
            let ya = fit_ar(&s, 2).unwrap();
            let yb = fit_ar(&shifted, 2).unwrap();
            prop_assert!(close(&ya.ar, &yb.ar, 1e-6));
        }

        #[test]
        fn one_step_is_affine_in_history(seed in 0u64..1000, a in -3.0f64..3.0, b in -10.0f64..10.0, d in 0usize..2) {
            let s = arma(&[0.4], &[0.2], 300, seed);
            let m = fit_arima(&s, 1, d, 1).unwrap();
            let h1 = normals(40, seed + 1);
            let h2 = normals(40, seed + 2);
            let f = |h: &[f64]| m.predict_next(h, None).unwrap();
            let t = |h: &[f64]| h.iter().map(|v| a * v + b).collect::<Vec<_>>();
            let off1 = f(&t(&h1)) - a * f(&h1);
            let off2 = f(&t(&h2)) - a * f(&h2);
            prop_assert!((off1 - off2).abs() < 1e-9);
        }
    }
}
