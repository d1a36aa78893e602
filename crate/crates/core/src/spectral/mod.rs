//! Fourier-side identities of the wave (and heat) Green function.
//!
//! The central object is the weighted Green energy
//!
//! ```text
//! E(t, α) = ∫_ℝ |FG(t,·)(ξ)|² |ξ|^α dξ = C_α · t^{e(α)}
//! ```
//!
//! with `e(α) = 1 - α` for the wave kernel (`FG(t,·)(ξ) = sin(t|ξ|)/|ξ|`) and
//! `e(α) = -(α+1)/2` for the heat kernel (`FG(t,·)(ξ) = exp(-t ξ²/2)`).
//! `C_α` is computed once by quadrature and cached per `(kernel, α)`.
//!
//! Wave-kernel quadrature works period by period: panels `[kπ/t, (k+1)π/t]`
//! follow the zeros of `sin²`, the first panel (where `|ξ|^α` may be singular)
//! uses tanh-sinh, and beyond `A = Pπ/t` the tail `∫_A^∞ sin²(tξ) ξ^{α-2} dξ`
//! is summed from its asymptotic expansion.

mod cache;
mod norms;

pub use cache::{CAlphaCache, CacheStats};
pub use norms::{norm_equivalence_check, NormComparison, TestFunction};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, HamError, Result};
use crate::quad::{gauss_kronrod, tanh_sinh, QuadResult};
use crate::specfun::ln_gamma_unchecked;

/// Fundamental solution used by the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Wave,
    Heat,
}

impl Kernel {
    pub fn as_str(self) -> &'static str {
        match self {
            Kernel::Wave => "wave",
            Kernel::Heat => "heat",
        }
    }
}

impl std::fmt::Display for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Kernel {
    type Err = HamError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wave" => Ok(Kernel::Wave),
            "heat" => Ok(Kernel::Heat),
            other => Err(HamError::Config(format!("unknown kernel '{other}' (expected wave|heat)"))),
        }
    }
}

/// Physical parameters of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Hurst index `H` of the spatial noise.
    pub hurst: f64,
    /// Coupling `λ` in front of `u·Ẋ`.
    pub lambda: f64,
    /// Constant initial value `η`.
    pub eta: f64,
    pub kernel: Kernel,
    /// Admits `0 < H ≤ 1/4`; only the divergence probe accepts such parameters.
    #[serde(default)]
    pub diagnostic: bool,
}

impl ModelParams {
    /// Wave-kernel parameters in standard mode. Call [`ModelParams::validate`]
    /// (or let the consuming operation do it) before use.
    pub fn new(hurst: f64, lambda: f64, eta: f64) -> Self {
        ModelParams { hurst, lambda, eta, kernel: Kernel::Wave, diagnostic: false }
    }

    pub fn with_kernel(mut self, kernel: Kernel) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_diagnostic(mut self, diagnostic: bool) -> Self {
        self.diagnostic = diagnostic;
        self
    }

    /// `γ = 1 - 2H`, the exponent of the spectral density.
    pub fn gamma(&self) -> f64 {
        1.0 - 2.0 * self.hurst
    }

    /// Checks the Hurst range for the current mode and finiteness of `λ`, `η`.
    ///
    /// `λ = 0` and `η = 0` pass this check; they are degenerate but
    /// well-defined limits. Use [`ModelParams::require_nontrivial`] where a
    /// non-degenerate model is mandatory.
    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || !self.eta.is_finite() {
            return domain("lambda and eta must be finite");
        }
        let h = self.hurst;
        if self.diagnostic {
            if !(h > 0.0 && h < 0.5) {
                return domain(format!("diagnostic mode needs 0 < H < 1/2, got H = {h}"));
            }
            return Ok(());
        }
        if !(h > 0.25 && h < 0.5) {
            return domain(format!(
                "H = {h} outside (1/4, 1/2): no solution exists for H <= 1/4 and the rough-noise \
                 formulas need H < 1/2"
            ));
        }
        Ok(())
    }

    /// Standard-mode validation; refuses diagnostic-only Hurst values.
    pub fn require_standard(&self) -> Result<()> {
        let h = self.hurst;
        if !(h > 0.25 && h < 0.5) {
            return domain(format!(
                "H = {h} outside (1/4, 1/2): no solution exists for H <= 1/4 (the chaos series needs 2(1-2H) < 1)"
            ));
        }
        ModelParams { diagnostic: false, ..*self }.validate()
    }

    /// Rejects the trivial cases `λ = 0` or `η = 0`.
    pub fn require_nontrivial(&self) -> Result<()> {
        if self.lambda == 0.0 {
            return domain("lambda must be nonzero");
        }
        if self.eta == 0.0 {
            return domain("eta must be nonzero");
        }
        Ok(())
    }
}

/// Noise normalisation constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConstants {
    /// `c_H = Γ(2H+1) sin(πH) / (2π)`, the spectral density prefactor.
    pub c_h: f64,
    /// `C_H = H(1-2H)/2`, the real-space prefactor.
    pub big_c_h: f64,
}

pub fn noise_constants(hurst: f64) -> Result<NoiseConstants> {
    if !(hurst > 0.0 && hurst < 0.5) {
        return domain(format!("noise constants need 0 < H < 1/2, got {hurst}"));
    }
    let c_h = (ln_gamma_unchecked(2.0 * hurst + 1.0)).exp() * (PI * hurst).sin() / (2.0 * PI);
    Ok(NoiseConstants { c_h, big_c_h: hurst * (1.0 - 2.0 * hurst) / 2.0 })
}

/// `FG(t,·)(ξ)`: `sin(t|ξ|)/|ξ|` (value `t` at `ξ = 0`) or `exp(-t ξ²/2)`.
#[inline]
pub fn green_fourier(t: f64, xi: f64, kernel: Kernel) -> f64 {
    match kernel {
        Kernel::Wave => {
            let a = xi.abs();
            if a * t < 1e-8 {
                // sin(x)/x = 1 - x²/6 + …
                t * (1.0 - (a * t) * (a * t) / 6.0)
            } else {
                (t * a).sin() / a
            }
        }
        Kernel::Heat => (-0.5 * t * xi * xi).exp(),
    }
}

/// Exponent `e(α)` in `E(t, α) = C_α t^{e(α)}`.
pub fn energy_exponent(alpha: f64, kernel: Kernel) -> f64 {
    match kernel {
        Kernel::Wave => 1.0 - alpha,
        Kernel::Heat => -(alpha + 1.0) / 2.0,
    }
}

/// Range of `α` for which `C_α` is finite.
pub fn check_alpha(alpha: f64, kernel: Kernel) -> Result<()> {
    let ok = match kernel {
        Kernel::Wave => alpha > -1.0 && alpha < 1.0,
        Kernel::Heat => alpha > -1.0 && alpha.is_finite(),
    };
    if ok {
        Ok(())
    } else {
        domain(format!(
            "alpha = {alpha} outside the validity range of the {kernel} energy identity ({})",
            match kernel {
                Kernel::Wave => "-1 < alpha < 1",
                Kernel::Heat => "alpha > -1",
            }
        ))
    }
}

/// Quadrature settings for the frequency integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    /// Relative tolerance per panel.
    pub rel_tol: f64,
    /// Number of `sin²` periods integrated before switching to the
    /// asymptotic tail (wave kernel).
    pub periods: usize,
    /// Cut-off `ξ_max·√t` for the Gaussian heat integrand.
    pub heat_cutoff: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { rel_tol: 1e-13, periods: 64, heat_cutoff: 12.0 }
    }
}

/// A cached energy constant `C_α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConstant {
    pub kernel: Kernel,
    pub alpha: f64,
    pub value: f64,
    pub quad_error: f64,
}

/// Half-line selector for [`green_energy_half_line`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfLine {
    Positive,
    Negative,
}

/// `∫ |FG(t,·)(ξ)|² |ξ|^α dξ` over one half-line, by direct quadrature at `t`.
pub fn green_energy_half_line(
    t: f64,
    alpha: f64,
    kernel: Kernel,
    side: HalfLine,
    cfg: &QuadConfig,
) -> Result<QuadResult> {
    if !(t > 0.0) {
        return domain(format!("Green energy needs t > 0, got {t}"));
    }
    check_alpha(alpha, kernel)?;
    let sign = match side {
        HalfLine::Positive => 1.0,
        HalfLine::Negative => -1.0,
    };
    let f = move |x: f64| {
        let g = green_fourier(t, sign * x, kernel);
        g * g * x.powf(alpha)
    };
    match kernel {
        Kernel::Wave => {
            let period = PI / t;
            let body = periodic_panels(f, period, cfg.periods, cfg.rel_tol)?;
            let tail = sin2_power_tail(t, alpha - 2.0, cfg.periods as f64 * period)?;
            Ok(body + tail)
        }
        Kernel::Heat => {
            let scale = 1.0 / t.sqrt();
            let x_max = cfg.heat_cutoff * scale;
            let head = tanh_sinh(move |x, _, _| f(x), 0.0, scale, 0.0, cfg.rel_tol)?;
            let body = gauss_kronrod(f, scale, x_max, 0.0, cfg.rel_tol, 2000)?;
            // ∫_X^∞ e^{-t x²} x^α dx ≤ e^{-t X²} X^{α-1} / (2t) for X² t ≥ α.
            let bound = (-t * x_max * x_max).exp() * x_max.powf(alpha - 1.0) / (2.0 * t);
            Ok(head + body + QuadResult { value: 0.0, error: bound, evals: 0 })
        }
    }
}

/// `∫_ℝ |FG(t,·)(ξ)|² |ξ|^α dξ` by direct quadrature (both half-lines).
pub fn green_energy_quadrature(t: f64, alpha: f64, kernel: Kernel, cfg: &QuadConfig) -> Result<QuadResult> {
    let pos = green_energy_half_line(t, alpha, kernel, HalfLine::Positive, cfg)?;
    let neg = green_energy_half_line(t, alpha, kernel, HalfLine::Negative, cfg)?;
    Ok(pos + neg)
}

/// Integrates `f` over `[0, periods·period]` panel by panel. The first panel
/// uses tanh-sinh to absorb a possible `x^α` singularity at zero.
fn periodic_panels<F: Fn(f64) -> f64 + Copy>(
    f: F,
    period: f64,
    periods: usize,
    rel_tol: f64,
) -> Result<QuadResult> {
    let mut acc = tanh_sinh(move |x, _, _| f(x), 0.0, period, 0.0, rel_tol)?;
    for k in 1..periods {
        let a = k as f64 * period;
        acc = acc + gauss_kronrod(f, a, a + period, 0.0, rel_tol, 200)?;
    }
    Ok(acc)
}

/// Partial integral `∫_0^Λ f` with period-aligned panels and a final partial panel.
fn periodic_partial<F: Fn(f64) -> f64 + Copy>(
    f: F,
    period: f64,
    from: f64,
    to: f64,
    rel_tol: f64,
) -> Result<QuadResult> {
    let mut acc = QuadResult::zero();
    let mut a = from;
    if a == 0.0 {
        let b = period.min(to);
        acc = tanh_sinh(move |x, _, _| f(x), 0.0, b, 0.0, rel_tol)?;
        a = b;
    }
    while a < to {
        let mut next = ((a / period).floor() + 1.0) * period;
        if next <= a * (1.0 + 4.0 * f64::EPSILON) {
            next += period;
        }
        let b = next.min(to);
        if b > a {
            acc = acc + gauss_kronrod(f, a, b, 0.0, rel_tol, 200)?;
        }
        a = b;
    }
    Ok(acc)
}

/// `∫_A^∞ sin²(t x) x^s dx` for `s < -1` and `A` a multiple of `π/t`.
///
/// `sin² = (1 - cos 2tx)/2`; the cosine part follows from repeated integration
/// by parts, `T(s) = -s A^{s-1}/ω² - s(s-1)/ω² · T(s-2)` with `ω = 2t`, summed
/// until the terms stop shrinking. The error is the first omitted term.
fn sin2_power_tail(t: f64, s: f64, a: f64) -> Result<QuadResult> {
    if !(s < -1.0) {
        return domain(format!("tail expansion needs s < -1, got {s}"));
    }
    let omega2 = 4.0 * t * t;
    let mean = 0.5 * a.powf(s + 1.0) / (-s - 1.0);
    let mut cos_part = 0.0;
    let mut coeff = 1.0;
    let mut sk = s;
    let mut last = f64::INFINITY;
    let mut err = f64::INFINITY;
    for _ in 0..40 {
        let term = coeff * (-sk * a.powf(sk - 1.0) / omega2);
        if term.abs() >= last {
            err = last;
            break;
        }
        cos_part += term;
        last = term.abs();
        err = term.abs() * f64::EPSILON;
        coeff *= -sk * (sk - 1.0) / omega2;
        sk -= 2.0;
        if last < 1e-300 {
            break;
        }
    }
    if !err.is_finite() {
        return Err(HamError::Numeric {
            what: "asymptotic tail expansion diverged".into(),
            estimate: mean,
            error: err,
            evals: 0,
        });
    }
    Ok(QuadResult { value: mean - 0.5 * cos_part, error: err + mean * f64::EPSILON, evals: 0 })
}

/// `C_α` by quadrature, bypassing the cache.
pub fn c_alpha_uncached(alpha: f64, kernel: Kernel, cfg: &QuadConfig) -> Result<SpectralConstant> {
    check_alpha(alpha, kernel)?;
    let q = green_energy_quadrature(1.0, alpha, kernel, cfg)?;
    let rel = q.error / q.value;
    if !(q.value > 0.0) || !(rel <= 1e-8) {
        return Err(HamError::Numeric {
            what: format!("C_alpha for {kernel}, alpha = {alpha} did not reach 1e-8 relative accuracy"),
            estimate: q.value,
            error: q.error,
            evals: q.evals,
        });
    }
    Ok(SpectralConstant { kernel, alpha, value: q.value, quad_error: q.error })
}

/// `C_α`, served from the process-wide cache when available.
pub fn compute_c_alpha(alpha: f64, kernel: Kernel, cfg: &QuadConfig) -> Result<SpectralConstant> {
    CAlphaCache::global().get_or_compute(alpha, kernel, cfg)
}

/// `C_α · t^{e(α)}` from the cached constant.
pub fn weighted_green_energy(t: f64, alpha: f64, kernel: Kernel) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("Green energy needs t > 0, got {t}"));
    }
    let c = compute_c_alpha(alpha, kernel, &QuadConfig::default())?;
    Ok(c.value * t.powf(energy_exponent(alpha, kernel)))
}

/// One partial integral of the divergence probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub cutoff: f64,
    pub partial: f64,
    pub quad_error: f64,
}

/// Partial integrals `P_k = ∫_{|ξ|≤Λ_k} |FG(1,·)(ξ)|² |ξ|^{2-4H} dξ` (wave kernel).
///
/// The integrand tail is `|ξ|^{-4H}` on average, so `P_k` saturates for
/// `H > 1/4` and grows like `Λ^{1-4H}` (logarithmically at `H = 1/4`) otherwise.
pub fn divergence_probe(hurst: f64, cutoffs: &[f64]) -> Result<Vec<ProbePoint>> {
    if !(hurst > 0.0 && hurst < 0.5) {
        return domain(format!("divergence probe needs 0 < H < 1/2, got {hurst}"));
    }
    if cutoffs.is_empty() {
        return domain("divergence probe needs at least one cutoff");
    }
    if cutoffs.iter().any(|c| !(*c > 0.0) || !c.is_finite()) || cutoffs.windows(2).any(|w| w[1] <= w[0]) {
        return domain("cutoffs must be positive and strictly increasing");
    }
    let w = 2.0 - 4.0 * hurst;
    let f = move |x: f64| {
        let g = green_fourier(1.0, x, Kernel::Wave);
        g * g * x.powf(w)
    };
    let mut out = Vec::with_capacity(cutoffs.len());
    let mut acc = QuadResult::zero();
    let mut from = 0.0;
    for &c in cutoffs {
        acc = acc + periodic_partial(f, PI, from, c, 1e-12)?;
        from = c;
        out.push(ProbePoint { cutoff: c, partial: 2.0 * acc.value, quad_error: 2.0 * acc.error });
    }
    Ok(out)
}

/// Least-squares slope of `ln(P_k - P_{k-1})` against `ln Λ_k`.
///
/// For geometric cutoffs the increments scale like `Λ^{1-4H}`, so the slope
/// estimates the growth (or, when negative, decay) exponent.
pub fn probe_growth_exponent(points: &[ProbePoint]) -> Result<f64> {
    if points.len() < 3 {
        return domain("need at least three probe points to fit an exponent");
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for w in points.windows(2) {
        let d = w[1].partial - w[0].partial;
        if d <= 0.0 {
            return Err(HamError::Invariant("probe partial integrals are not increasing".into()));
        }
        xs.push(w[1].cutoff.ln());
        ys.push(d.ln());
    }
    Ok(crate::fit::least_squares(&xs, &ys, None)?.slope)
}
