//! Weighted straight-line fit y = m·x + b from the normal equations.

use serde::{Deserialize, Serialize};

use super::Measured;
use crate::error::{Result, VitError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_err: f64,
    pub intercept_err: f64,
    /// cov(m, b).
    pub covariance: f64,
    pub chi2: f64,
    pub points: usize,
}

impl LinearFit {
    /// Intercept over slope with the slope-intercept correlation included.
    pub fn ratio(&self) -> Result<Measured> {
        ratio_with_error(
            Measured::new(self.intercept, self.intercept_err),
            Measured::new(self.slope, self.slope_err),
            self.covariance,
        )
    }
}

/// a/b with first-order error propagation; `cov` is cov(a, b).
pub fn ratio_with_error(a: Measured, b: Measured, cov: f64) -> Result<Measured> {
    if b.value == 0.0 || !b.value.is_finite() {
        return Err(VitError::Degenerate("ratio with zero denominator".into()));
    }
    let r = a.value / b.value;
    // ∂r/∂a = 1/b, ∂r/∂b = −a/b²
    let (da, db) = (1.0 / b.value, -a.value / (b.value * b.value));
    let var = da * da * a.error * a.error + db * db * b.error * b.error + 2.0 * da * db * cov;
    Ok(Measured::new(r, var.max(0.0).sqrt()))
}

/// Least squares with weights 1/σ². Two points give exact interpolation.
pub fn fit_linear_weighted(x: &[f64], y: &[f64], sigma: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || y.len() != sigma.len() {
        return Err(VitError::domain("x, y and sigma differ in length"));
    }
    if x.len() < 2 {
        return Err(VitError::domain(format!("a line needs at least two points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(VitError::domain("non-finite data in linear fit"));
    }
    if sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(VitError::domain("uncertainties must be > 0"));
    }
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..x.len() {
        let w = 1.0 / (sigma[i] * sigma[i]);
        s += w;
        sx += w * x[i];
        sy += w * y[i];
        sxx += w * x[i] * x[i];
        sxy += w * x[i] * y[i];
    }
    let det = s * sxx - sx * sx;
    if !(det > 1e-12 * s * sxx) {
        return Err(VitError::Degenerate("all abscissae are equal".into()));
    }
    let slope = (s * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    let chi2 = (0..x.len()).map(|i| ((y[i] - slope * x[i] - intercept) / sigma[i]).powi(2)).sum();
    Ok(LinearFit {
        slope,
        intercept,
        slope_err: (s / det).sqrt(),
        intercept_err: (sxx / det).sqrt(),
        covariance: -sx / det,
        chi2,
        points: x.len(),
    })
}

/// Fit only the points with x strictly above `threshold`.
pub fn fit_linear_above(x: &[f64], y: &[f64], sigma: &[f64], threshold: f64) -> Result<LinearFit> {
    if x.len() != y.len() || y.len() != sigma.len() {
        return Err(VitError::domain("x, y and sigma differ in length"));
    }
    let keep: Vec<usize> = (0..x.len()).filter(|&i| x[i] > threshold).collect();
    let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
    fit_linear_weighted(&pick(x), &pick(y), &pick(sigma))
}
