use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::FieldEnsemble;
use crate::chaos::lyapunov_bracket;
use crate::error::{domain, HamError, Result};
use crate::fit::least_squares;
use crate::output::fmt_f64;

/// Sum in a fixed binary tree over the index range; the result depends only
/// on the values and their order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2..=8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub t: f64,
    pub x: f64,
    pub p: f64,
    pub estimate: f64,
    pub se: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub rows: Vec<MomentRow>,
    pub warnings: Vec<String>,
}

/// Mean of `|v|^p` with its delete-one jackknife standard error.
fn jackknife_mean(v: &[f64], p: f64) -> (f64, f64) {
    let s = v.len();
    let ys: Vec<f64> = v.iter().map(|x| x.abs().powf(p)).collect();
    if ys.iter().all(|y| *y == ys[0]) {
        return (ys[0], 0.0);
    }
    let total = pairwise_sum(&ys);
    let mean = total / s as f64;
    if s < 2 {
        return (mean, f64::INFINITY);
    }
    let loo: Vec<f64> = ys.iter().map(|y| (total - y) / (s - 1) as f64).collect();
    let loo_mean = pairwise_sum(&loo) / s as f64;
    let dev: Vec<f64> = loo.iter().map(|l| (l - loo_mean).powi(2)).collect();
    let var = (s - 1) as f64 / s as f64 * pairwise_sum(&dev);
    (mean, var.sqrt())
}

/// `E|u(t,x)|^p` estimates for every requested `(t, x)`.
pub fn estimate_moments(ens: &FieldEnsemble, p: f64, xs: &[f64], ts: &[f64]) -> Result<MomentTable> {
    if !(p >= 1.0) || !p.is_finite() {
        return domain(format!("moment order must be >= 1, got {p}"));
    }
    let mut warnings = Vec::new();
    if ens.samples < 100 {
        warnings.push(format!("only {} samples; standard errors are unreliable below 100", ens.samples));
    }
    let mut rows = Vec::with_capacity(xs.len() * ts.len());
    for &x in xs {
        let c = ens.column_of(x)?;
        for &t in ts {
            let k = ens.grid.step_of(t)?;
            let (estimate, se) = jackknife_mean(&ens.samples_at(k, c), p);
            rows.push(MomentRow { t: ens.grid.t(k), x: ens.columns[c], p, estimate, se, samples: ens.samples });
        }
    }
    Ok(MomentTable { rows, warnings })
}

/// CSV with columns `t,x,p,estimate,se,S`.
pub fn moments_csv(table: &MomentTable) -> String {
    let mut s = String::from("t,x,p,estimate,se,S\n");
    for r in &table.rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_f64(r.t),
            fmt_f64(r.x),
            fmt_f64(r.p),
            fmt_f64(r.estimate),
            fmt_f64(r.se),
            r.samples
        ));
    }
    s
}

/// Growth rate of `ln E|u|^p` over a time window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub p: f64,
    pub slope: f64,
    /// 95% confidence interval.
    pub ci: (f64, f64),
    pub window: (f64, f64),
    pub points: usize,
    /// Series bracket over the same window, when it can be computed.
    pub bracket: Option<(f64, f64)>,
    /// Whether the confidence interval meets the bracket.
    pub consistent: Option<bool>,
}

/// Weighted least-squares slope of `ln E|u|^p` against `t` over `window`.
///
/// Uses the rows of `table` with order `p`, position `x`, and `t` in the
/// window. Weights are `(estimate/se)²`; the slope error is inflated by the
/// root reduced chi-square when that exceeds one, since the time points share
/// samples.
pub fn fit_lyapunov(table: &MomentTable, p: f64, x: f64, window: (f64, f64)) -> Result<LyapunovEstimate> {
    let rows: Vec<&MomentRow> = table
        .rows
        .iter()
        .filter(|r| r.p == p && (r.x - x).abs() < 1e-12 && r.t >= window.0 - 1e-12 && r.t <= window.1 + 1e-12)
        .collect();
    if rows.len() < 5 {
        return Err(HamError::Precision(format!("need at least 5 time points in the window, got {}", rows.len())));
    }
    if let Some(r) = rows.iter().find(|r| !(r.estimate > 0.0) || r.se / r.estimate >= 0.1) {
        return Err(HamError::Precision(format!(
            "relative standard error {} at t = {} is not below 0.1",
            r.se / r.estimate,
            r.t
        )));
    }
    let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.estimate.ln()).collect();
    let exact = rows.iter().all(|r| r.se == 0.0);
    let (slope, se, dof) = if exact || rows.iter().any(|r| r.se == 0.0) {
        let f = least_squares(&ts, &ys, None)?;
        (f.slope, if f.slope_se.is_finite() { f.slope_se } else { 0.0 }, f.dof)
    } else {
        let w: Vec<f64> = rows.iter().map(|r| (r.estimate / r.se).powi(2)).collect();
        let f = least_squares(&ts, &ys, Some(&w))?;
        let chi = if f.dof > 0 { (f.rss / f.dof as f64).sqrt() } else { 1.0 };
        (f.slope, f.slope_se * chi.max(1.0), f.dof)
    };
    let q = if dof > 0 {
        StudentsT::new(0.0, 1.0, dof as f64).map_err(|e| HamError::Numeric {
            what: format!("Student t quantile: {e}"),
            estimate: f64::NAN,
            error: f64::NAN,
            evals: 0,
        })?
        .inverse_cdf(0.975)
    } else {
        f64::INFINITY
    };
    let half = if se == 0.0 { 0.0 } else { q * se };
    Ok(LyapunovEstimate {
        p,
        slope,
        ci: (slope - half, slope + half),
        window: (ts[0], ts[ts.len() - 1]),
        points: rows.len(),
        bracket: None,
        consistent: None,
    })
}

impl LyapunovEstimate {
    /// Attaches the series bracket over the same window. Windows too short for
    /// a bracket are left without one.
    pub fn with_bracket(mut self, params: &crate::spectral::ModelParams, allowance: f64) -> Result<Self> {
        let (a, b) = self.window;
        if !(a > 0.0) || b / a < 4.0 {
            return Ok(self);
        }
        let grid: Vec<f64> = (0..=20).map(|i| a + (b - a) * i as f64 / 20.0).collect();
        let br = lyapunov_bracket(params, self.p, &grid)?;
        let lo = br.slope_lower * (1.0 - allowance);
        let hi = br.slope_upper * (1.0 + allowance);
        self.bracket = Some((br.slope_lower, br.slope_upper));
        self.consistent = Some(self.ci.1 >= lo && self.ci.0 <= hi);
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_exact_values() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn jackknife_of_mean_is_classical_se() {
        let v: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64 - 4.0).collect();
        let (m, se) = jackknife_mean(&v, 1.0);
        let ys: Vec<f64> = v.iter().map(|x| x.abs()).collect();
        let mu = ys.iter().sum::<f64>() / 50.0;
        let sd = (ys.iter().map(|y| (y - mu).powi(2)).sum::<f64>() / 49.0).sqrt();
        assert!((m - mu).abs() < 1e-14);
        assert!((se - sd / 50f64.sqrt()).abs() < 1e-12);
        assert_eq!(jackknife_mean(&[0.7; 10], 2.0), (0.7f64.powi(2), 0.0));
    }

    #[test]
    fn fit_refuses_noisy_or_short_tables() {
        let rows = |se: f64, n: usize| MomentTable {
            rows: (0..n)
                .map(|i| MomentRow { t: i as f64, x: 0.0, p: 2.0, estimate: (0.5 * i as f64).exp(), se, samples: 100 })
                .collect(),
            warnings: vec![],
        };
        assert!(matches!(fit_lyapunov(&rows(0.01, 4), 2.0, 0.0, (0.0, 10.0)), Err(HamError::Precision(_))));
        assert!(matches!(fit_lyapunov(&rows(0.5, 8), 2.0, 0.0, (0.0, 10.0)), Err(HamError::Precision(_))));
        let f = fit_lyapunov(&rows(1e-3, 8), 2.0, 0.0, (0.0, 10.0)).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-3 && f.ci.0 <= f.slope && f.slope <= f.ci.1);
    }
}
