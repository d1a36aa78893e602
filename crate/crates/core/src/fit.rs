//! Weighted linear least squares.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; with weights `1/σ²` it is the propagated
    /// error, otherwise it is scaled by the residual variance.
    pub slope_se: f64,
    pub intercept_se: f64,
    /// Residual degrees of freedom, `len - 2`.
    pub dof: usize,
    /// Weighted residual sum of squares.
    pub rss: f64,
}

/// Fits `y ≈ intercept + slope·x`. `weights`, if present, are inverse variances
/// and must be positive.
pub fn least_squares(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<LinearFit> {
    if x.len() != y.len() {
        return domain("x and y lengths differ");
    }
    if x.len() < 2 {
        return domain("least squares needs at least two points");
    }
    if let Some(w) = weights {
        if w.len() != x.len() {
            return domain("weight length differs from data length");
        }
        if w.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return domain("weights must be positive and finite");
        }
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let n = x.len();
    let sw: f64 = (0..n).map(w).sum();
    let mx = (0..n).map(|i| w(i) * x[i]).sum::<f64>() / sw;
    let my = (0..n).map(|i| w(i) * y[i]).sum::<f64>() / sw;
    let sxx: f64 = (0..n).map(|i| w(i) * (x[i] - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return domain("x values are all equal");
    }
    let sxy: f64 = (0..n).map(|i| w(i) * (x[i] - mx) * (y[i] - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = (0..n).map(|i| w(i) * (y[i] - intercept - slope * x[i]).powi(2)).sum();
    let dof = n - 2;
    let scale = if weights.is_some() {
        1.0
    } else if dof > 0 {
        rss / dof as f64
    } else {
        f64::NAN
    };
    let slope_se = (scale / sxx).sqrt();
    let intercept_se = (scale * (1.0 / sw + mx * mx / sxx)).sqrt();
    Ok(LinearFit { slope, intercept, slope_se, intercept_se, dof, rss })
}
