//! Wiener-chaos term norms `n!‖f̃ₙ(·,t,x)‖²` and the moment series built on them.
//!
//! Every term is bracketed by closed forms:
//!
//! * upper, explicit (`n ≤ n_explicit`): expand
//!   `|η₁|^γ ∏_{j≥2} |ηⱼ - ηⱼ₋₁|^γ ≤ |η₁|^γ ∏_{j≥2} (|ηⱼ|^γ + |ηⱼ₋₁|^γ)`,
//!   giving `2^{n-1}` products `∏ |ηₖ|^{aₖ}` with `aₖ ∈ {0, γ, 2γ}`; each
//!   frequency integral is `C_{aₖ} rₖ^{e(aₖ)}` and the time integral is a
//!   simplex integral;
//! * upper, coarse: `η² λ^{2n} C*ⁿ t^{na} / Γ(na+1)`, dominating the explicit form;
//! * lower: restrict to frequencies of alternating sign, where
//!   `|ηⱼ - ηⱼ₋₁| ≥ |ηⱼ|`, and keep one half-line per coordinate.
//!
//! Here `γ = 1 - 2H` and `a = e(γ) + 1` (`2H + 1` for the wave kernel). The
//! total time exponent of every explicit summand is `na`, so each bound is a
//! `t`-independent coefficient times `(λ² t^a)ⁿ η²`.

mod qmc;

pub use qmc::{kernel_norm_qmc, QmcConfig, QmcEstimate, QmcIntegrand};

use serde::{Deserialize, Serialize};

use crate::error::{domain, HamError, Result};
use crate::fit::least_squares;
use crate::output::{fmt_f64, fmt_opt};
use crate::specfun::{ln_gamma_unchecked, log_sum_exp, series_lower_bound, stirling_constant};
use crate::spectral::{compute_c_alpha, energy_exponent, noise_constants, Kernel, ModelParams, QuadConfig};

/// Highest order evaluated through the explicit multi-index sum by default.
pub const N_EXPLICIT: usize = 14;
/// Hard cap on the explicit order; `2^{n-1}` summands.
pub const N_EXPLICIT_MAX: usize = 24;
/// Relative truncation tolerance of the moment series.
pub const SERIES_REL_TOL: f64 = 1e-6;

/// QMC value attached to a bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermEstimate {
    pub value: f64,
    pub se: f64,
}

/// Bounds on `n!‖f̃ₙ(·,t,x)‖²`; the norm does not depend on `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaosTermBracket {
    pub order: usize,
    pub horizon: f64,
    pub lower: f64,
    pub upper: f64,
    pub estimate: Option<TermEstimate>,
}

impl ChaosTermBracket {
    /// `lower ≤ upper`, `order 0 ⇒ lower = upper`, and the estimate (if any)
    /// within three standard errors of the bracket.
    pub fn check(&self) -> Result<()> {
        if !(self.lower <= self.upper) {
            return Err(HamError::Invariant(format!(
                "term {}: lower {} exceeds upper {}",
                self.order, self.lower, self.upper
            )));
        }
        if self.order == 0 && self.lower != self.upper {
            return Err(HamError::Invariant("order-0 bracket is not degenerate".into()));
        }
        if let Some(e) = self.estimate {
            if e.value < self.lower - 3.0 * e.se || e.value > self.upper + 3.0 * e.se {
                return Err(HamError::Invariant(format!(
                    "term {} at t = {}: estimate {} ± {} outside [{}, {}]",
                    self.order, self.horizon, e.value, e.se, self.lower, self.upper
                )));
            }
        }
        Ok(())
    }
}

/// Truncated second-moment (or moment-bound) series with per-term brackets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSeriesResult {
    pub horizon: f64,
    pub p: f64,
    /// Highest order included in the sums.
    pub truncation: usize,
    pub lower_sum: f64,
    pub upper_sum: f64,
    pub ln_lower_sum: f64,
    pub ln_upper_sum: f64,
    /// Bound on the neglected upper terms `n > truncation`.
    pub tail_bound: f64,
    pub per_term: Vec<ChaosTermBracket>,
}

/// The `t`-, `λ`- and `η`-free parts of the term bounds for a fixed `(H, kernel)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosCoefficients {
    pub hurst: f64,
    pub kernel: Kernel,
    /// Time exponent per order.
    pub a: f64,
    pub n_explicit: usize,
    /// `ln` of the explicit coefficient, index `n` (entry 0 is 0).
    ln_explicit: Vec<f64>,
    /// `C*` of the coarse form.
    pub c_star: f64,
    /// Base of the lower bound, `c_H C_γ Γ(e(γ)+1) / 2`.
    pub lower_base: f64,
    /// `C_0, C_γ, C_{2γ}`.
    pub c_values: [f64; 3],
}

impl ChaosCoefficients {
    pub fn new(hurst: f64, kernel: Kernel) -> Result<Self> {
        Self::with_explicit_order(hurst, kernel, N_EXPLICIT)
    }

    pub fn with_explicit_order(hurst: f64, kernel: Kernel, n_explicit: usize) -> Result<Self> {
        ModelParams::new(hurst, 1.0, 1.0).with_kernel(kernel).require_standard()?;
        if n_explicit > N_EXPLICIT_MAX {
            return Err(HamError::UnsupportedOrder {
                order: n_explicit,
                reason: format!("explicit multi-index sums are limited to n <= {N_EXPLICIT_MAX}"),
            });
        }
        let gamma = 1.0 - 2.0 * hurst;
        let cfg = QuadConfig::default();
        let c_h = noise_constants(hurst)?.c_h;
        let mut c_values = [0.0; 3];
        let mut ln_c = [0.0; 3];
        let mut ln_g = [0.0; 3];
        for k in 0..3 {
            let alpha = k as f64 * gamma;
            c_values[k] = compute_c_alpha(alpha, kernel, &cfg)?.value;
            ln_c[k] = c_values[k].ln();
            ln_g[k] = ln_gamma_unchecked(energy_exponent(alpha, kernel) + 1.0);
        }
        let a = energy_exponent(gamma, kernel) + 1.0;
        let ln_ch = c_h.ln();
        let mut ln_explicit = vec![0.0];
        let mut counts = vec![0usize; n_explicit + 1];
        for n in 1..=n_explicit {
            let masks = 1usize << (n - 1);
            let mut logs = Vec::with_capacity(masks);
            for mask in 0..masks {
                multi_index_counts(n, mask, &mut counts);
                let s: f64 = counts[1..=n].iter().map(|&c| ln_c[c] + ln_g[c]).sum();
                logs.push(s);
            }
            let ln_sum = log_sum_exp(&logs);
            ln_explicit.push(n as f64 * ln_ch + ln_sum - ln_gamma_unchecked(n as f64 * a + 1.0));
        }
        let max_c = c_values.iter().copied().fold(0.0, f64::max);
        let max_g = ln_g.iter().copied().fold(f64::NEG_INFINITY, f64::max).exp();
        let c_star = 2.0 * c_h * max_c * max_g.max(1.0);
        let lower_base = 0.5 * c_h * c_values[1] * ln_g[1].exp();
        Ok(ChaosCoefficients { hurst, kernel, a, n_explicit, ln_explicit, c_star, lower_base, c_values })
    }

    /// `ln` of the explicit coefficient; `None` beyond the explicit range.
    pub fn ln_explicit(&self, n: usize) -> Option<f64> {
        self.ln_explicit.get(n).copied()
    }

    pub fn ln_coarse(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let nf = n as f64;
        nf * self.c_star.ln() - ln_gamma_unchecked(nf * self.a + 1.0)
    }

    pub fn ln_lower(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let nf = n as f64;
        nf * self.lower_base.ln() - ln_gamma_unchecked(nf * self.a + 1.0)
    }

    /// Explicit coefficient where available, coarse beyond.
    pub fn ln_upper(&self, n: usize) -> f64 {
        self.ln_explicit(n).unwrap_or_else(|| self.ln_coarse(n))
    }

    /// `ratio(m) = coarse(m+1)/coarse(m)` for the variable `x = λ² t^a`;
    /// decreasing in `m`.
    fn ln_coarse_ratio(&self, m: usize, ln_x: f64) -> f64 {
        let mf = m as f64;
        self.c_star.ln() + ln_x + ln_gamma_unchecked(mf * self.a + 1.0)
            - ln_gamma_unchecked((mf + 1.0) * self.a + 1.0)
    }
}

/// Exponent multiplicities for the multi-index selected by `mask`.
///
/// Bit `k-2` of `mask` set means `k ∈ I`: the factor `|η_k|^γ + |η_{k-1}|^γ`
/// contributes `|η_k|^γ`; otherwise it contributes `|η_{k-1}|^γ`. `counts[k]`
/// is then `a_k/γ ∈ {0, 1, 2}`, with `|η₁|^γ` always present.
fn multi_index_counts(n: usize, mask: usize, counts: &mut [usize]) {
    counts[1..=n].iter_mut().for_each(|c| *c = 0);
    counts[1] = 1;
    for k in 2..=n {
        if mask >> (k - 2) & 1 == 1 {
            counts[k] += 1;
        } else {
            counts[k - 1] += 1;
        }
    }
}

/// Exponent vectors `(a₁/γ, …, aₙ/γ)` of the explicit upper bound, in
/// enumeration order. Intended for inspection and tests.
pub fn multi_indices(n: usize) -> Result<Vec<Vec<usize>>> {
    if n == 0 || n > N_EXPLICIT_MAX {
        return Err(HamError::UnsupportedOrder { order: n, reason: "multi-indices need 1 <= n <= 24".into() });
    }
    let mut counts = vec![0; n + 1];
    Ok((0..1usize << (n - 1))
        .map(|mask| {
            multi_index_counts(n, mask, &mut counts);
            counts[1..].to_vec()
        })
        .collect())
}

fn check_horizon(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return domain(format!("horizon must be finite and >= 0, got {t}"));
    }
    Ok(())
}

/// `ln` of `η² (λ² t^a)ⁿ`; `-∞` when the term vanishes.
fn ln_scale(params: &ModelParams, a: f64, t: f64, n: usize) -> f64 {
    let e = 2.0 * params.eta.abs().ln();
    if n == 0 {
        return e;
    }
    let nf = n as f64;
    e + nf * (2.0 * params.lambda.abs().ln() + a * t.ln())
}

fn term(ln_coeff: f64, params: &ModelParams, a: f64, t: f64, n: usize) -> f64 {
    if n == 0 {
        return params.eta * params.eta;
    }
    (ln_coeff + ln_scale(params, a, t, n)).exp()
}

/// Upper bound on `n!‖f̃ₙ(·,t,x)‖²`: explicit sum for `n ≤ 14`, coarse form beyond.
pub fn kernel_norm_upper(params: &ModelParams, t: f64, n: usize) -> Result<f64> {
    params.require_standard()?;
    check_horizon(t)?;
    let c = ChaosCoefficients::new(params.hurst, params.kernel)?;
    Ok(term(c.ln_upper(n), params, c.a, t, n))
}

/// The explicit multi-index bound at any `n ≤ 24`.
pub fn kernel_norm_upper_explicit(params: &ModelParams, t: f64, n: usize) -> Result<f64> {
    params.require_standard()?;
    check_horizon(t)?;
    let c = ChaosCoefficients::with_explicit_order(params.hurst, params.kernel, n.max(1))?;
    Ok(term(c.ln_explicit(n).expect("order within explicit range"), params, c.a, t, n))
}

/// The coarse bound `η² λ^{2n} C*ⁿ t^{na} / Γ(na+1)`.
pub fn kernel_norm_upper_coarse(params: &ModelParams, t: f64, n: usize) -> Result<f64> {
    params.require_standard()?;
    check_horizon(t)?;
    let c = ChaosCoefficients::with_explicit_order(params.hurst, params.kernel, 0)?;
    Ok(term(c.ln_coarse(n), params, c.a, t, n))
}

/// Lower bound on `n!‖f̃ₙ(·,t,x)‖²`.
pub fn kernel_norm_lower(params: &ModelParams, t: f64, n: usize) -> Result<f64> {
    params.require_standard()?;
    check_horizon(t)?;
    let c = ChaosCoefficients::with_explicit_order(params.hurst, params.kernel, 0)?;
    Ok(term(c.ln_lower(n), params, c.a, t, n))
}

/// `E|u(t,x)|²` bracket with tolerance [`SERIES_REL_TOL`].
pub fn second_moment_series(params: &ModelParams, t: f64) -> Result<MomentSeriesResult> {
    second_moment_series_with(params, t, SERIES_REL_TOL, &ChaosCoefficients::new(params.hurst, params.kernel)?)
}

/// Sums term brackets until the coarse-form tail bound falls below
/// `rel_tol · upper_sum`.
pub fn second_moment_series_with(
    params: &ModelParams,
    t: f64,
    rel_tol: f64,
    coeffs: &ChaosCoefficients,
) -> Result<MomentSeriesResult> {
    params.require_standard()?;
    check_horizon(t)?;
    if !(rel_tol > 0.0) {
        return domain("series tolerance must be positive");
    }
    let eta2 = params.eta * params.eta;
    let mut per_term = vec![ChaosTermBracket { order: 0, horizon: t, lower: eta2, upper: eta2, estimate: None }];
    if t == 0.0 || params.lambda == 0.0 || params.eta == 0.0 {
        let ln = eta2.ln();
        return Ok(MomentSeriesResult {
            horizon: t,
            p: 2.0,
            truncation: 0,
            lower_sum: eta2,
            upper_sum: eta2,
            ln_lower_sum: ln,
            ln_upper_sum: ln,
            tail_bound: 0.0,
            per_term,
        });
    }
    let ln_x = 2.0 * params.lambda.abs().ln() + coeffs.a * t.ln();
    let mut ln_lo = vec![eta2.ln()];
    let mut ln_up = vec![eta2.ln()];
    let ln_tol = rel_tol.ln();
    let mut n = 0usize;
    loop {
        n += 1;
        let lo = coeffs.ln_lower(n) + ln_scale(params, coeffs.a, t, n);
        let up = coeffs.ln_upper(n) + ln_scale(params, coeffs.a, t, n);
        ln_lo.push(lo);
        ln_up.push(up);
        per_term.push(ChaosTermBracket { order: n, horizon: t, lower: lo.exp(), upper: up.exp(), estimate: None });
        let ln_r = coeffs.ln_coarse_ratio(n + 1, ln_x);
        if ln_r < 0.0 {
            let ln_next = coeffs.ln_coarse(n + 1) + ln_scale(params, coeffs.a, t, n + 1);
            let ln_tail = ln_next - (-ln_r.exp()).ln_1p();
            let ln_upper_sum = log_sum_exp(&ln_up);
            if ln_tail - ln_upper_sum < ln_tol {
                let ln_lower_sum = log_sum_exp(&ln_lo);
                return Ok(MomentSeriesResult {
                    horizon: t,
                    p: 2.0,
                    truncation: n,
                    lower_sum: ln_lower_sum.exp(),
                    upper_sum: ln_upper_sum.exp(),
                    ln_lower_sum,
                    ln_upper_sum,
                    tail_bound: ln_tail.exp(),
                    per_term,
                });
            }
        }
        if n >= 200_000 {
            return Err(HamError::Numeric {
                what: "moment series did not reach its truncation tolerance".into(),
                estimate: log_sum_exp(&ln_up).exp(),
                error: f64::INFINITY,
                evals: n,
            });
        }
    }
}

/// `ln` of the p-th moment bound; see [`p_moment_upper`].
pub fn ln_p_moment_upper(params: &ModelParams, t: f64, p: f64) -> Result<f64> {
    ln_p_moment_upper_with(params, t, p, &ChaosCoefficients::new(params.hurst, params.kernel)?)
}

fn ln_p_moment_upper_with(params: &ModelParams, t: f64, p: f64, coeffs: &ChaosCoefficients) -> Result<f64> {
    params.require_standard()?;
    check_horizon(t)?;
    if !(p >= 2.0) || !p.is_finite() {
        return domain(format!("p-moment bound needs p >= 2, got {p}"));
    }
    if p == 2.0 {
        // Orthogonal chaoses: the second moment is the plain sum.
        let s = second_moment_series_with(params, t, SERIES_REL_TOL * 1e-6, coeffs)?;
        return Ok((s.ln_upper_sum.exp() + s.tail_bound).ln());
    }
    let ln_eta = params.eta.abs().ln();
    if t == 0.0 || params.lambda == 0.0 || params.eta == 0.0 {
        return Ok(p * ln_eta);
    }
    let ln_x = 2.0 * params.lambda.abs().ln() + coeffs.a * t.ln();
    let ln_pm1 = (p - 1.0).ln();
    // Terms (p-1)^{n/2} √Uₙ; the coarse tail has ratios √((p-1)·ratio(m)).
    let mut logs = vec![ln_eta];
    let mut n = 0usize;
    loop {
        n += 1;
        let ln_u = coeffs.ln_upper(n) + ln_scale(params, coeffs.a, t, n);
        logs.push(0.5 * ln_u + 0.5 * n as f64 * ln_pm1);
        let ln_r = 0.5 * (coeffs.ln_coarse_ratio(n + 1, ln_x) + ln_pm1);
        if ln_r < 0.0 {
            let ln_next = 0.5 * (coeffs.ln_coarse(n + 1) + ln_scale(params, coeffs.a, t, n + 1))
                + 0.5 * (n + 1) as f64 * ln_pm1;
            let ln_tail = ln_next - (-ln_r.exp()).ln_1p();
            let ln_sum = log_sum_exp(&logs);
            if ln_tail - ln_sum < (1e-14f64).ln() {
                let total = log_sum_exp(&[ln_sum, ln_tail]);
                return Ok(p * total);
            }
        }
        if n >= 200_000 {
            return Err(HamError::Numeric {
                what: "p-moment series did not converge".into(),
                estimate: f64::NAN,
                error: f64::INFINITY,
                evals: n,
            });
        }
    }
}

/// Upper bound on `E|u(t,x)|^p`.
///
/// For `p > 2`, hypercontractivity gives
/// `‖u‖_p ≤ Σₙ (p-1)^{n/2} ‖Iₙ(fₙ)‖₂`, evaluated with the upper term bounds and
/// an explicit tail. For `p = 2` chaoses are orthogonal and the bound is the
/// upper second-moment sum plus its tail.
pub fn p_moment_upper(params: &ModelParams, t: f64, p: f64) -> Result<f64> {
    let v = ln_p_moment_upper(params, t, p)?;
    if t == 0.0 || params.lambda == 0.0 {
        return Ok(params.eta.abs().powf(p));
    }
    Ok(v.exp())
}

/// Envelope `|η|^p C₁ exp(C₂ κ t)` with `κ = |λ|^{2/a} p^{(a+1)/a}` fitted to
/// the p-moment bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub p: f64,
    pub c1: f64,
    pub c2: f64,
    pub kappa: f64,
    /// Grid used for the fit.
    pub t_grid: Vec<f64>,
    /// `ln(bound) - ln(envelope)` at each grid point; all `≤ 0`.
    pub residuals: Vec<f64>,
}

/// Least-squares fit of `ln(bound/|η|^p)` against `κt`, then `C₁` is raised
/// until the envelope dominates the bound at every grid point.
pub fn fit_p_moment_envelope(params: &ModelParams, p: f64, t_grid: &[f64]) -> Result<EnvelopeFit> {
    params.require_standard()?;
    params.require_nontrivial()?;
    if t_grid.len() < 3 || t_grid.iter().any(|t| !(*t > 0.0)) {
        return domain("envelope fit needs at least three positive times");
    }
    let coeffs = ChaosCoefficients::new(params.hurst, params.kernel)?;
    let a = coeffs.a;
    let kappa = params.lambda.abs().powf(2.0 / a) * p.powf((a + 1.0) / a);
    let ln_eta_p = p * params.eta.abs().ln();
    let ys: Vec<f64> = t_grid
        .iter()
        .map(|&t| ln_p_moment_upper_with(params, t, p, &coeffs).map(|v| v - ln_eta_p))
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = t_grid.iter().map(|t| kappa * t).collect();
    let fit = least_squares(&xs, &ys, None)?;
    let c2 = fit.slope;
    let ln_c1 = xs.iter().zip(&ys).map(|(x, y)| y - c2 * x).fold(f64::NEG_INFINITY, f64::max);
    let residuals = xs.iter().zip(&ys).map(|(x, y)| y - ln_c1 - c2 * x).collect();
    Ok(EnvelopeFit { p, c1: ln_c1.exp(), c2, kappa, t_grid: t_grid.to_vec(), residuals })
}

/// Least-squares growth rates of the lower and upper moment bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovBracket {
    pub p: f64,
    pub window: Vec<f64>,
    pub slope_lower: f64,
    pub slope_upper: f64,
}

/// Slopes of `ln E|u|^p` bounds over `window`.
///
/// Lower: `(p/2)·ln(lower_sum)` (Jensen, `E|u|^p ≥ (E u²)^{p/2}`).
/// Upper: `ln p_moment_upper`, which for `p = 2` is the upper second-moment sum.
pub fn lyapunov_bracket(params: &ModelParams, p: f64, window: &[f64]) -> Result<LyapunovBracket> {
    params.require_standard()?;
    if !(p >= 2.0) {
        return domain(format!("Lyapunov bracket needs p >= 2, got {p}"));
    }
    if params.eta == 0.0 {
        return domain("eta must be nonzero for a growth rate");
    }
    if window.len() < 2 || window.windows(2).any(|w| !(w[1] > w[0])) || !(window[0] > 0.0) {
        return domain("window must be a strictly increasing grid of positive times");
    }
    let ratio = window[window.len() - 1] / window[0];
    if ratio < 4.0 {
        return Err(HamError::Precision(format!(
            "window ratio t_m/t_1 = {ratio} is below 4; slopes would be dominated by transients"
        )));
    }
    if params.lambda == 0.0 {
        return Ok(LyapunovBracket { p, window: window.to_vec(), slope_lower: 0.0, slope_upper: 0.0 });
    }
    let coeffs = ChaosCoefficients::new(params.hurst, params.kernel)?;
    let mut lo = Vec::with_capacity(window.len());
    let mut up = Vec::with_capacity(window.len());
    for &t in window {
        let s = second_moment_series_with(params, t, SERIES_REL_TOL, &coeffs)?;
        lo.push(0.5 * p * s.ln_lower_sum);
        up.push(if p == 2.0 { s.ln_upper_sum } else { ln_p_moment_upper_with(params, t, p, &coeffs)? });
    }
    let slope_lower = least_squares(window, &lo, None)?.slope;
    let slope_upper = least_squares(window, &up, None)?.slope;
    if p == 2.0 {
        if !(slope_lower > 0.0) {
            return Err(HamError::Invariant(format!("second-moment lower slope {slope_lower} is not positive")));
        }
        if !(slope_lower <= slope_upper) {
            return Err(HamError::Invariant(format!(
                "lower slope {slope_lower} exceeds upper slope {slope_upper}"
            )));
        }
    }
    Ok(LyapunovBracket { p, window: window.to_vec(), slope_lower, slope_upper })
}

/// Closed-form exponential lower bound on `lower_sum(t)`.
///
/// With `S = sup_n Γ(an+1)/(a^{an} n^{(1-a)/2} (n!)^a)` and `a ≥ 1`,
/// `Γ(an+1) ≤ max(S,1)ⁿ a^{an} (n!)^a`, so
/// `lower_sum(t) ≥ η² Σ xⁿ/(n!)^a ≥ η² c₁ exp(c₂ x^{1/a})`,
/// `x = λ² (c_H C_γ / 2) K t^a`, `K = Γ(2H+1)/(a^a max(S,1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StirlingLinkage {
    pub x: f64,
    pub k: f64,
    pub stirling: f64,
    /// `η² c₁ exp(c₂ x^{1/a})`.
    pub bound: f64,
}

pub fn stirling_linkage(params: &ModelParams, t: f64) -> Result<StirlingLinkage> {
    params.require_standard()?;
    check_horizon(t)?;
    let coeffs = ChaosCoefficients::with_explicit_order(params.hurst, params.kernel, 0)?;
    let a = coeffs.a;
    let s = stirling_constant(a)?;
    let k = 1.0 / (a.powf(a) * s.max(1.0));
    // lower_base already carries Γ(e(γ)+1) = Γ(2H+1).
    let x = params.lambda * params.lambda * coeffs.lower_base * k * t.powf(a);
    let lb = series_lower_bound(x, a)?;
    Ok(StirlingLinkage { x, k, stirling: s, bound: params.eta * params.eta * lb.value })
}

/// CSV with columns `n,t,lower,upper,estimate,se`.
pub fn brackets_csv(rows: &[ChaosTermBracket]) -> String {
    let mut s = String::from("n,t,lower,upper,estimate,se\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.order,
            fmt_f64(r.horizon),
            fmt_f64(r.lower),
            fmt_f64(r.upper),
            fmt_opt(r.estimate.map(|e| e.value)),
            fmt_opt(r.estimate.map(|e| e.se)),
        ));
    }
    s
}

/// Upper bound on `E|u|^p` at one horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PMomentSummary {
    pub p: f64,
    pub upper: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(h: f64) -> ModelParams {
        ModelParams::new(h, 1.0, 1.0)
    }

    #[test]
    fn multi_indices_cover_expected_set() {
        let d = multi_indices(3).unwrap();
        assert_eq!(d.len(), 4);
        // Total exponent nγ, first coordinate carries at least γ.
        for a in &d {
            assert_eq!(a.iter().sum::<usize>(), 3);
            assert!(a[0] >= 1);
        }
        let mut sorted = d.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 4);
        assert_eq!(multi_indices(1).unwrap(), vec![vec![1]]);
    }

    #[test]
    fn order_zero_and_one() {
        let p = ModelParams::new(0.4, 1.3, 0.7);
        assert_eq!(kernel_norm_upper(&p, 2.0, 0).unwrap(), 0.7 * 0.7);
        assert_eq!(kernel_norm_lower(&p, 2.0, 0).unwrap(), 0.7 * 0.7);
        let t: f64 = 1.5;
        let c = noise_constants(0.4).unwrap().c_h;
        let cg = compute_c_alpha(0.2, Kernel::Wave, &QuadConfig::default()).unwrap().value;
        let exact = 0.49 * 1.69 * c * cg * t.powf(1.8) / 1.8;
        assert_relative_eq!(kernel_norm_upper(&p, t, 1).unwrap(), exact, max_relative = 1e-12);
        assert_relative_eq!(kernel_norm_lower(&p, t, 1).unwrap(), 0.5 * exact, max_relative = 1e-12);
    }

    #[test]
    fn first_term_closed_form_value() {
        // c_H C_γ = 2^{2H-2}: the n = 1 term at H = 0.4, t = 1 is 2^{-1.2}/1.8.
        let v = kernel_norm_upper(&params(0.4), 1.0, 1).unwrap();
        assert_relative_eq!(v, 2f64.powf(-1.2) / 1.8, max_relative = 1e-9);
    }

    #[test]
    fn explicit_below_coarse() {
        for &h in &[0.3, 0.35, 0.4, 0.45] {
            for &t in &[0.5, 1.0, 2.0] {
                for n in 1..=14 {
                    let e = kernel_norm_upper_explicit(&params(h), t, n).unwrap();
                    let c = kernel_norm_upper_coarse(&params(h), t, n).unwrap();
                    assert!(e <= c, "H={h} t={t} n={n}: {e} > {c}");
                }
            }
        }
    }

    #[test]
    fn lower_below_upper() {
        for &h in &[0.3, 0.4, 0.45] {
            for n in 0..=30 {
                let lo = kernel_norm_lower(&params(h), 1.7, n).unwrap();
                let up = kernel_norm_upper(&params(h), 1.7, n).unwrap();
                assert!(lo <= up, "H={h} n={n}");
            }
        }
    }

    #[test]
    fn term_ratios_decay() {
        let p = params(0.4);
        let terms: Vec<f64> = (14..=31).map(|n| kernel_norm_upper(&p, 1.0, n).unwrap()).collect();
        let ratios: Vec<f64> = terms.windows(2).map(|w| w[1] / w[0]).collect();
        assert!(ratios.windows(2).all(|r| r[1] < r[0]));
        assert!(*ratios.last().unwrap() < 0.05);
    }

    #[test]
    fn eta_scaling() {
        let a = ModelParams::new(0.35, 1.2, 1.0);
        let b = ModelParams::new(0.35, 1.2, -3.0);
        for n in 0..20 {
            let r = kernel_norm_upper(&b, 1.1, n).unwrap() / kernel_norm_upper(&a, 1.1, n).unwrap();
            assert_relative_eq!(r, 9.0, max_relative = 1e-12);
        }
        let s = second_moment_series(&b, 1.1).unwrap().upper_sum / second_moment_series(&a, 1.1).unwrap().upper_sum;
        assert_relative_eq!(s, 9.0, max_relative = 1e-10);
        let q = p_moment_upper(&b, 1.1, 4.0).unwrap() / p_moment_upper(&a, 1.1, 4.0).unwrap();
        assert_relative_eq!(q, 81.0, max_relative = 1e-10);
    }

    #[test]
    fn series_degenerate_cases() {
        let p = ModelParams::new(0.4, 0.0, 2.0);
        let s = second_moment_series(&p, 3.0).unwrap();
        assert_eq!((s.lower_sum, s.upper_sum, s.truncation), (4.0, 4.0, 0));
        let s = second_moment_series(&params(0.4), 0.0).unwrap();
        assert_eq!((s.lower_sum, s.upper_sum), (1.0, 1.0));
        assert_eq!(p_moment_upper(&p, 2.0, 3.0).unwrap(), 8.0);
        let tiny = second_moment_series(&ModelParams::new(0.4, 1e-6, 1.0), 1.0).unwrap();
        assert!((tiny.upper_sum - 1.0).abs() < 1e-11);
    }

    #[test]
    fn series_truncation_certificate() {
        for &(t, lam) in &[(1.0, 1.0), (20.0, 4.0), (50.0, 1.0)] {
            let s = second_moment_series(&ModelParams::new(0.4, lam, 1.0), t).unwrap();
            assert!(s.tail_bound < 1e-6 * s.upper_sum);
            assert!(s.lower_sum <= s.upper_sum);
            assert_eq!(s.per_term.len(), s.truncation + 1);
            s.per_term.iter().try_for_each(|b| b.check()).unwrap();
        }
    }

    #[test]
    fn p_moment_at_two_is_upper_sum() {
        let p = params(0.4);
        let s = second_moment_series(&p, 1.0).unwrap();
        let m = p_moment_upper(&p, 1.0, 2.0).unwrap();
        assert!((m - s.upper_sum).abs() <= 2e-6 * s.upper_sum);
        assert!(m >= s.upper_sum);
        assert!(p_moment_upper(&p, 1.0, 1.5).is_err());
        assert!(p_moment_upper(&p, 1.0, 4.0).unwrap() >= m * m);
    }

    #[test]
    fn lyapunov_basics() {
        let p = params(0.4);
        let w: Vec<f64> = (0..=15).map(|k| 5.0 + k as f64).collect();
        let b = lyapunov_bracket(&p, 2.0, &w).unwrap();
        assert!(b.slope_lower > 0.0 && b.slope_lower <= b.slope_upper);
        let z = lyapunov_bracket(&ModelParams::new(0.4, 0.0, 1.0), 2.0, &w).unwrap();
        assert_eq!((z.slope_lower, z.slope_upper), (0.0, 0.0));
        assert!(matches!(lyapunov_bracket(&p, 2.0, &[5.0, 10.0]), Err(HamError::Precision(_))));
        let b4 = lyapunov_bracket(&p, 4.0, &w).unwrap();
        assert!(b4.slope_lower <= b4.slope_upper);
    }

    #[test]
    fn stirling_linkage_holds() {
        for &h in &[0.3, 0.4, 0.45] {
            for &t in &[0.5, 1.0, 5.0, 20.0] {
                let p = params(h);
                let l = stirling_linkage(&p, t).unwrap();
                let s = second_moment_series(&p, t).unwrap();
                assert!(s.lower_sum >= l.bound, "H={h} t={t}: {} < {}", s.lower_sum, l.bound);
            }
        }
    }

    #[test]
    fn envelope_dominates() {
        let grid: Vec<f64> = (1..=50).map(|k| k as f64).collect();
        let f = fit_p_moment_envelope(&params(0.4), 4.0, &grid).unwrap();
        assert!(f.residuals.iter().all(|r| *r <= 1e-12));
        assert!(f.c2 > 0.0 && f.c1 > 0.0);
    }

    #[test]
    fn heat_kernel_brackets() {
        let p = params(0.4).with_kernel(Kernel::Heat);
        for n in 0..10 {
            let lo = kernel_norm_lower(&p, 1.0, n).unwrap();
            let up = kernel_norm_upper(&p, 1.0, n).unwrap();
            assert!(lo <= up, "n={n}: {lo} > {up}");
        }
        assert!(second_moment_series(&p, 2.0).unwrap().upper_sum.is_finite());
    }

    #[test]
    fn csv_layout() {
        let rows = [ChaosTermBracket {
            order: 1,
            horizon: 1.0,
            lower: 0.1,
            upper: 0.2,
            estimate: Some(TermEstimate { value: 0.15, se: 0.01 }),
        }];
        let csv = brackets_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("n,t,lower,upper,estimate,se"));
        let cells: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[4].parse::<f64>().unwrap(), 0.15);
    }

    #[test]
    fn rejects_out_of_range_h() {
        for &h in &[0.2, 0.25, 0.5] {
            assert!(matches!(kernel_norm_upper(&params(h), 1.0, 2), Err(HamError::Domain(_))));
            assert!(matches!(kernel_norm_lower(&params(h), 1.0, 2), Err(HamError::Domain(_))));
        }
    }
}
