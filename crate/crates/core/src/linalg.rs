//! Small dense linear-algebra helpers shared by the fitters.

use nalgebra::{DMatrix, DVector};

/// Solves `a x = b` for a symmetric positive (semi)definite `a`,
/// falling back to LU when Cholesky fails.
pub(crate) fn solve_symmetric(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        let x = ch.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return Some(x);
        }
    }
    let x = a.clone().lu().solve(b)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Minimum-norm least squares via SVD. Also returns the numerical rank of
/// the design, so duplicated or all-zero columns get a zero share instead
/// of blowing up the normal equations. Columns are scaled to unit norm
/// first, so the rank does not depend on the units of each regressor.
pub(crate) fn least_squares_svd(rows: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, usize)> {
    let k = rows.first()?.len();
    let norms: Vec<f64> = (0..k)
        .map(|j| {
            let n = rows.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt();
            if n > 0.0 { n } else { 1.0 }
        })
        .collect();
    let x = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j] / norms[j]);
    let svd = x.svd(true, true);
    let smax = svd.singular_values.max();
    if smax <= 0.0 {
        return Some((vec![0.0; k], 0));
    }
    let eps = smax * 1e-10 * (rows.len().max(k) as f64);
    let rank = svd.rank(eps);
    let beta = svd.solve(&DVector::from_column_slice(y), eps).ok()?;
    let beta: Vec<f64> = beta.iter().zip(&norms).map(|(b, n)| b / n).collect();
    beta.iter().all(|v| v.is_finite()).then_some((beta, rank))
}

/// Largest root modulus of `z^p - c_1 z^{p-1} - ... - c_p`, i.e. the
/// spectral radius of the companion matrix. Below one means the lag
/// polynomial `1 - c_1 B - ... - c_p B^p` has all roots outside the unit circle.
pub(crate) fn companion_radius(coeffs: &[f64]) -> f64 {
    let p = coeffs.len();
    if p == 0 {
        return 0.0;
    }
    let mut m = DMatrix::<f64>::zeros(p, p);
    for (j, c) in coeffs.iter().enumerate() {
        m[(0, j)] = *c;
    }
    for i in 1..p {
        m[(i, i - 1)] = 1.0;
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Durbin–Levinson recursion on autocorrelations `r[0..=order]` (with `r[0] = 1`).
///
/// Returns the order-`order` AR coefficients, the partial autocorrelations
/// for lags `1..=order`, and the innovation-variance ratio `prod(1 - pacf^2)`.
/// `None` if the recursion hits a non-positive prediction error.
pub(crate) fn durbin_levinson(r: &[f64], order: usize) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let mut phi = vec![0.0; order];
    let mut pacf = Vec::with_capacity(order);
    let mut err = r[0];
    for k in 1..=order {
        if err <= 0.0 || !err.is_finite() {
            return None;
        }
        let mut acc = r[k];
        for j in 1..k {
            acc -= phi[j - 1] * r[k - j];
        }
        let kappa = acc / err;
        let prev = phi.clone();
        phi[k - 1] = kappa;
        for j in 1..k {
            phi[j - 1] = prev[j - 1] - kappa * prev[k - j - 1];
        }
        err *= 1.0 - kappa * kappa;
        pacf.push(kappa);
    }
    Some((phi, pacf, err / r[0]))
}
