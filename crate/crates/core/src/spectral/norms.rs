//! Two representations of the fractional norm of a spatial test function:
//!
//! ```text
//! spectral:   ∫ |Fφ(ξ)|² c_H |ξ|^{1-2H} dξ
//! real space: C_H ∫∫ |φ(x) - φ(y)|² |x - y|^{2H-2} dx dy
//! ```
//!
//! The real-space side is reduced to `2 C_H ∫_0^∞ h^{2H-2} D(h) dh` with
//! `D(h) = ∫ |φ(x+h) - φ(x)|² dx`, and `D` is evaluated by an inner quadrature.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::noise_constants;
use crate::error::{domain, Result};
use crate::quad::{gauss_kronrod, tanh_sinh, QuadResult};

/// Built-in test functions with closed-form Fourier transforms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TestFunction {
    /// `1_{[0, width]}`.
    Indicator { width: f64 },
    /// `max(0, 1 - |x|/half_width)`.
    Tent { half_width: f64 },
    /// `exp(-x²/(2σ²))`.
    Gaussian { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormComparison {
    pub function: TestFunction,
    pub hurst: f64,
    pub spectral: f64,
    pub spectral_error: f64,
    pub real_space: f64,
    pub real_space_error: f64,
    /// `spectral / real_space`.
    pub ratio: f64,
}

impl TestFunction {
    fn scale(&self) -> f64 {
        match *self {
            TestFunction::Indicator { width } => width,
            TestFunction::Tent { half_width } => half_width,
            TestFunction::Gaussian { sigma } => sigma,
        }
    }

    fn validate(&self) -> Result<()> {
        let s = self.scale();
        if !(s > 0.0) || !s.is_finite() {
            return domain(format!("test function scale must be positive and finite, got {s}"));
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Indicator { width } => {
                if (0.0..=width).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Tent { half_width } => (1.0 - x.abs() / half_width).max(0.0),
            TestFunction::Gaussian { sigma } => (-0.5 * (x / sigma).powi(2)).exp(),
        }
    }

    /// `|Fφ(ξ)|²` with `Fφ(ξ) = ∫ e^{-iξx} φ(x) dx`.
    pub fn fourier_sq(&self, xi: f64) -> f64 {
        let a = xi.abs();
        match *self {
            TestFunction::Indicator { width } => {
                let z = 0.5 * width * a;
                if z < 1e-6 {
                    width * width * (1.0 - z * z / 3.0)
                } else {
                    let s = z.sin();
                    4.0 * s * s / (a * a)
                }
            }
            TestFunction::Tent { half_width: w } => {
                let z = 0.5 * w * a;
                let sinc = if z < 1e-6 { 1.0 - z * z / 6.0 } else { z.sin() / z };
                w * w * sinc.powi(4)
            }
            TestFunction::Gaussian { sigma } => 2.0 * PI * sigma * sigma * (-(sigma * a).powi(2)).exp(),
        }
    }

    /// `‖φ‖²_{L²}`.
    pub fn l2_sq(&self) -> f64 {
        match *self {
            TestFunction::Indicator { width } => width,
            TestFunction::Tent { half_width } => 2.0 * half_width / 3.0,
            TestFunction::Gaussian { sigma } => sigma * PI.sqrt(),
        }
    }

    /// Points where `φ` or its derivative is discontinuous.
    fn kinks(&self) -> Vec<f64> {
        match *self {
            TestFunction::Indicator { width } => vec![0.0, width],
            TestFunction::Tent { half_width: w } => vec![-w, 0.0, w],
            TestFunction::Gaussian { .. } => vec![0.0],
        }
    }

    /// Interval outside which `φ` is zero (or below 1e-30 for the Gaussian).
    fn support(&self) -> (f64, f64) {
        match *self {
            TestFunction::Indicator { width } => (0.0, width),
            TestFunction::Tent { half_width: w } => (-w, w),
            TestFunction::Gaussian { sigma } => (-12.0 * sigma, 12.0 * sigma),
        }
    }

    /// `D(h) = ∫ |φ(x+h) - φ(x)|² dx`.
    fn increment_energy(&self, h: f64) -> Result<QuadResult> {
        let (lo, hi) = self.support();
        let mut pts: Vec<f64> = self.kinks().into_iter().flat_map(|k| [k, k - h]).collect();
        pts.push(lo - h);
        pts.push(hi);
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * (1.0 + b.abs()));
        let f = |x: f64| {
            let d = self.eval(x + h) - self.eval(x);
            d * d
        };
        let mut acc = QuadResult::zero();
        for w in pts.windows(2) {
            if w[1] > w[0] {
                acc = acc + gauss_kronrod(f, w[0], w[1], 1e-15, 1e-12, 400)?;
            }
        }
        Ok(acc)
    }

    /// Lag beyond which `D(h) = 2‖φ‖²` to double precision.
    fn decorrelation_lag(&self) -> f64 {
        let (lo, hi) = self.support();
        hi - lo
    }

    /// Kinks of `D(h)` on `h > 0`.
    fn lag_kinks(&self) -> Vec<f64> {
        match *self {
            TestFunction::Indicator { width } => vec![width],
            TestFunction::Tent { half_width: w } => vec![w, 2.0 * w],
            TestFunction::Gaussian { sigma } => vec![sigma, 4.0 * sigma],
        }
    }
}

/// Spectral side: `∫ |Fφ(ξ)|² c_H |ξ|^{1-2H} dξ`.
pub fn spectral_norm_sq(phi: &TestFunction, hurst: f64) -> Result<QuadResult> {
    phi.validate()?;
    let c = noise_constants(hurst)?;
    let gamma = 1.0 - 2.0 * hurst;
    let f = |x: f64| phi.fourier_sq(x) * x.powf(gamma);
    let rel = 1e-12;
    let half = match *phi {
        TestFunction::Gaussian { sigma } => {
            let head = tanh_sinh(|x, _, _| f(x), 0.0, 1.0 / sigma, 0.0, rel)?;
            head + gauss_kronrod(f, 1.0 / sigma, 12.0 / sigma, 0.0, rel, 2000)?
        }
        TestFunction::Indicator { width: s } | TestFunction::Tent { half_width: s } => {
            // Zeros of the oscillating factor sit at multiples of 2π/s.
            let period = 2.0 * PI / s;
            let periods = 256;
            let mut acc = tanh_sinh(|x, _, _| f(x), 0.0, period, 0.0, rel)?;
            for k in 1..periods {
                let a = k as f64 * period;
                acc = acc + gauss_kronrod(f, a, a + period, 0.0, rel, 200)?;
            }
            let a = periods as f64 * period;
            acc + oscillatory_tail(phi, gamma, a)
        }
    };
    Ok(QuadResult { value: 2.0 * c.c_h * half.value, error: 2.0 * c.c_h * half.error, evals: half.evals })
}

/// `∫_A^∞ |Fφ|² ξ^γ dξ` from the mean of the oscillating factor; the
/// oscillating remainder is `O(A^{p-1})` below the mean and is reported as error.
fn oscillatory_tail(phi: &TestFunction, gamma: f64, a: f64) -> QuadResult {
    // |Fφ|² = amp · osc(ξ) · ξ^{-k}, mean(osc) = m.
    let (amp, k, m) = match *phi {
        TestFunction::Indicator { .. } => (4.0, 2.0, 0.5),
        TestFunction::Tent { half_width: w } => (16.0 / (w * w), 4.0, 0.375),
        TestFunction::Gaussian { .. } => unreachable!("gaussian has no oscillatory tail"),
    };
    let p = gamma - k;
    let mean = amp * m * a.powf(p + 1.0) / (-p - 1.0);
    let scale = phi.scale();
    // One integration by parts of the cosine terms gains a factor 1/(ξ·scale).
    let err = amp * a.powf(p) * 2.0 / scale;
    QuadResult { value: mean, error: err, evals: 0 }
}

/// Real-space side: `C_H ∫∫ |φ(x) - φ(y)|² |x - y|^{2H-2} dx dy`.
pub fn real_space_norm_sq(phi: &TestFunction, hurst: f64) -> Result<QuadResult> {
    phi.validate()?;
    let c = noise_constants(hurst)?;
    let e = 2.0 * hurst - 2.0;
    let w = phi.decorrelation_lag();
    let mut breaks = vec![0.0];
    breaks.extend(phi.lag_kinks().into_iter().filter(|&k| k < w));
    breaks.push(w);
    breaks.dedup();
    let mut acc = QuadResult::zero();
    let mut failure = None;
    for seg in breaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let r = tanh_sinh(
            |h, _, _| match phi.increment_energy(h) {
                Ok(d) => h.powf(e) * d.value,
                Err(err) => {
                    failure.get_or_insert(err);
                    0.0
                }
            },
            a,
            b,
            0.0,
            1e-10,
        )?;
        if let Some(err) = failure.take() {
            return Err(err);
        }
        acc = acc + r;
    }
    // For h ≥ w the two copies no longer overlap: D(h) = 2‖φ‖².
    let tail = 2.0 * phi.l2_sq() * w.powf(e + 1.0) / (-e - 1.0);
    let v = 2.0 * c.big_c_h * (acc.value + tail);
    Ok(QuadResult { value: v, error: 2.0 * c.big_c_h * acc.error, evals: acc.evals })
}

/// Evaluates both norm representations and their ratio.
pub fn norm_equivalence_check(phi: &TestFunction, hurst: f64) -> Result<NormComparison> {
    if !(hurst > 0.0 && hurst < 0.5) {
        return domain(format!("norm comparison needs 0 < H < 1/2, got {hurst}"));
    }
    let s = spectral_norm_sq(phi, hurst)?;
    let r = real_space_norm_sq(phi, hurst)?;
    Ok(NormComparison {
        function: *phi,
        hurst,
        spectral: s.value,
        spectral_error: s.error,
        real_space: r.value,
        real_space_error: r.error,
        ratio: s.value / r.value,
    })
}
