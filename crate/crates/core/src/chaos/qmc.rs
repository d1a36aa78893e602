//! Randomised quasi-Monte-Carlo evaluation of `n!‖f̃ₙ(·,t,x)‖²` from its
//! `2n`-dimensional representation
//!
//! ```text
//! η² λ^{2n} c_Hⁿ ∫_{Tₙ(t)} ∫_{ℝⁿ} ∏ⱼ |FG(t_{j+1} - tⱼ, ·)(ηⱼ)|² · |η₁|^γ ∏_{j≥2} |ηⱼ - ηⱼ₋₁|^γ dη dt.
//! ```
//!
//! Points come from a rank-1 Kronecker lattice `frac(i·g + Δ)` with
//! `gⱼ = frac(√pⱼ)` and a uniform random shift `Δ` per randomisation. Times
//! are sorted uniforms; frequencies are drawn from the symmetric density
//! `(q-1)/2 · (1+|η|)^{-q}` by inversion.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, HamError, Result};
use crate::rng::{stream, Domain};
use crate::specfun::ln_gamma_unchecked;
use crate::spectral::{green_fourier, noise_constants, ModelParams};

/// Which frequency weight is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QmcIntegrand {
    /// `|η₁|^γ ∏ |ηⱼ - ηⱼ₋₁|^γ`, the actual term.
    Exact,
    /// `|η₁|^γ ∏ (|ηⱼ|^γ + |ηⱼ₋₁|^γ)`, whose integral is the explicit upper bound.
    UpperBound,
    /// `∏ |ηⱼ|^γ` on alternating-sign orthants with `η₁ > 0`, whose integral is
    /// the lower bound.
    LowerBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QmcConfig {
    /// Lattice points per randomisation in the first round.
    pub points: usize,
    /// Number of independent random shifts, at least 16.
    pub randomizations: usize,
    pub seed: u64,
    /// Tail exponent `q` of the frequency proposal; `None` picks `4H`.
    pub proposal_exponent: Option<f64>,
    pub integrand: QmcIntegrand,
    /// Target `se / estimate`; points are doubled until reached.
    pub target_rel_se: f64,
    /// Point budget per randomisation.
    pub max_points: usize,
}

impl Default for QmcConfig {
    fn default() -> Self {
        QmcConfig {
            points: 1 << 14,
            randomizations: 16,
            seed: 0x5eed,
            proposal_exponent: None,
            integrand: QmcIntegrand::Exact,
            target_rel_se: 0.02,
            max_points: 1 << 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QmcEstimate {
    pub value: f64,
    pub se: f64,
    pub points: usize,
    pub randomizations: usize,
    /// Set when `se/value > 0.05` after the budget is spent.
    pub warning: Option<String>,
}

const PRIMES: [f64; 8] = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0];
const MAX_ORDER: usize = 4;

/// QMC estimate of `n!‖f̃ₙ(·,t,x)‖²` for `1 ≤ n ≤ 4`.
///
/// Each randomisation is an independent stream keyed by `(seed, r)`, and the
/// per-randomisation means are combined in index order, so the result is
/// bitwise independent of the worker count.
pub fn kernel_norm_qmc(params: &ModelParams, t: f64, n: usize, cfg: &QmcConfig) -> Result<QmcEstimate> {
    params.require_standard()?;
    if n == 0 || n > MAX_ORDER {
        return Err(HamError::UnsupportedOrder {
            order: n,
            reason: format!("QMC integration supports 1 <= n <= {MAX_ORDER}"),
        });
    }
    if !(t > 0.0) || !t.is_finite() {
        return domain(format!("QMC horizon must be positive, got {t}"));
    }
    if cfg.randomizations < 16 {
        return domain(format!("need at least 16 randomisations, got {}", cfg.randomizations));
    }
    if cfg.points == 0 || cfg.max_points < cfg.points {
        return domain("QMC point budget must be positive and at least the initial point count");
    }
    let gamma = params.gamma();
    let q = cfg.proposal_exponent.unwrap_or(2.0 - 2.0 * gamma);
    if !(q > 1.0) {
        return domain(format!("proposal exponent must exceed 1, got {q}"));
    }
    let c_h = noise_constants(params.hurst)?.c_h;
    let nf = n as f64;
    let ln_pref = 2.0 * params.eta.abs().ln() + 2.0 * nf * params.lambda.abs().ln() + nf * c_h.ln();
    // Simplex volume tⁿ/n!.
    let ln_vol = nf * t.ln() - ln_gamma_unchecked(nf + 1.0);
    let scale = (ln_pref + ln_vol).exp();
    let gens: Vec<f64> = PRIMES[..2 * n].iter().map(|p| p.sqrt().fract()).collect();
    let shifts: Vec<Vec<f64>> = (0..cfg.randomizations)
        .map(|r| {
            let mut rng = stream(cfg.seed, Domain::QmcShift, r as u64, 0);
            (0..2 * n).map(|_| rng.random::<f64>()).collect()
        })
        .collect();
    let integrand = Integrand { n, t, gamma, q, kernel: params.kernel, variant: cfg.integrand };

    let mut points = cfg.points;
    loop {
        let means: Vec<f64> = shifts
            .par_iter()
            .map(|shift| {
                let mut acc = 0.0;
                let mut u = vec![0.0; 2 * n];
                for i in 0..points {
                    let fi = i as f64;
                    for (d, ud) in u.iter_mut().enumerate() {
                        *ud = (fi * gens[d] + shift[d]).fract();
                    }
                    acc += integrand.eval(&u);
                }
                acc / points as f64
            })
            .collect();
        let r = means.len() as f64;
        let mean = means.iter().sum::<f64>() / r;
        let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (r - 1.0);
        let value = scale * mean;
        let se = scale * (var / r).sqrt();
        let rel = if value > 0.0 { se / value } else { f64::INFINITY };
        if rel <= cfg.target_rel_se || points * 2 > cfg.max_points {
            let warning = (rel > 0.05).then(|| {
                format!("QMC relative standard error {rel:.3} exceeds 0.05 after {points} points per shift")
            });
            return Ok(QmcEstimate { value, se, points, randomizations: cfg.randomizations, warning });
        }
        points *= 2;
    }
}

struct Integrand {
    n: usize,
    t: f64,
    gamma: f64,
    q: f64,
    kernel: crate::spectral::Kernel,
    variant: QmcIntegrand,
}

impl Integrand {
    /// Integrand divided by the sampling density, for a point of `[0,1)^{2n}`.
    /// The factor `tⁿ/n!` and all constants are applied by the caller.
    fn eval(&self, u: &[f64]) -> f64 {
        let n = self.n;
        let mut times = [0.0; MAX_ORDER + 1];
        for j in 0..n {
            times[j] = self.t * u[j];
        }
        times[..n].sort_by(f64::total_cmp);
        times[n] = self.t;
        let mut eta = [0.0; MAX_ORDER];
        let mut w = 1.0;
        let qm1 = self.q - 1.0;
        for j in 0..n {
            let v = u[n + j];
            let (sign, v) = if v < 0.5 { (-1.0, 2.0 * v) } else { (1.0, 2.0 * v - 1.0) };
            let r = (1.0 - v).powf(-1.0 / qm1) - 1.0;
            eta[j] = sign * r;
            // 1/density = 2/(q-1) · (1+r)^q
            w *= 2.0 / qm1 * (1.0 + r).powf(self.q);
        }
        let mut g = 1.0;
        for j in 0..n {
            let f = green_fourier(times[j + 1] - times[j], eta[j], self.kernel);
            g *= f * f;
        }
        let gm = self.gamma;
        let weight = match self.variant {
            QmcIntegrand::Exact => {
                let mut s = eta[0].abs().powf(gm);
                for j in 1..n {
                    s *= (eta[j] - eta[j - 1]).abs().powf(gm);
                }
                s
            }
            QmcIntegrand::UpperBound => {
                let mut s = eta[0].abs().powf(gm);
                for j in 1..n {
                    s *= eta[j].abs().powf(gm) + eta[j - 1].abs().powf(gm);
                }
                s
            }
            QmcIntegrand::LowerBound => {
                let alternating = (0..n).all(|j| (eta[j] > 0.0) == (j % 2 == 0));
                if alternating {
                    eta[..n].iter().map(|e| e.abs().powf(gm)).product()
                } else {
                    0.0
                }
            }
        };
        g * weight * w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::{kernel_norm_lower, kernel_norm_upper};
    use crate::spectral::Kernel;

    fn cfg() -> QmcConfig {
        QmcConfig { points: 1 << 13, max_points: 1 << 16, ..Default::default() }
    }

    #[test]
    fn first_order_matches_closed_form() {
        let p = ModelParams::new(0.4, 1.0, 1.0);
        let e = kernel_norm_qmc(&p, 1.0, 1, &cfg()).unwrap();
        let exact = kernel_norm_upper(&p, 1.0, 1).unwrap();
        assert!((e.value - exact).abs() <= 3.0 * e.se, "{} ± {} vs {exact}", e.value, e.se);
        assert!(e.warning.is_none());
    }

    #[test]
    fn bound_integrands_reproduce_closed_forms() {
        let p = ModelParams::new(0.4, 1.0, 1.0);
        for n in 1..=3 {
            let up = kernel_norm_qmc(&p, 1.0, n, &QmcConfig { integrand: QmcIntegrand::UpperBound, ..cfg() }).unwrap();
            let exact = kernel_norm_upper(&p, 1.0, n).unwrap();
            assert!((up.value - exact).abs() <= 4.0 * up.se, "n={n}: {} ± {} vs {exact}", up.value, up.se);
            let lo = kernel_norm_qmc(&p, 1.0, n, &QmcConfig { integrand: QmcIntegrand::LowerBound, ..cfg() }).unwrap();
            let exact = kernel_norm_lower(&p, 1.0, n).unwrap();
            assert!((lo.value - exact).abs() <= 4.0 * lo.se, "n={n}: {} ± {} vs {exact}", lo.value, lo.se);
        }
    }

    #[test]
    fn lambda_scaling_is_exact_with_common_numbers() {
        let a = kernel_norm_qmc(&ModelParams::new(0.35, 1.0, 1.0), 1.0, 2, &cfg()).unwrap();
        let b = kernel_norm_qmc(&ModelParams::new(0.35, 2.0, 1.0), 1.0, 2, &cfg()).unwrap();
        assert!((b.value / a.value - 16.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let p = ModelParams::new(0.4, 1.0, 1.0);
        let a = kernel_norm_qmc(&p, 2.0, 3, &cfg()).unwrap();
        let b = kernel_norm_qmc(&p, 2.0, 3, &cfg()).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        let c = kernel_norm_qmc(&p, 2.0, 3, &QmcConfig { seed: 99, ..cfg() }).unwrap();
        assert_ne!(a.value.to_bits(), c.value.to_bits());
    }

    #[test]
    fn heat_first_order() {
        let p = ModelParams::new(0.4, 1.0, 1.0).with_kernel(Kernel::Heat);
        let e = kernel_norm_qmc(&p, 1.0, 1, &cfg()).unwrap();
        let exact = kernel_norm_upper(&p, 1.0, 1).unwrap();
        assert!((e.value - exact).abs() <= 3.0 * e.se, "{} ± {} vs {exact}", e.value, e.se);
    }

    #[test]
    fn rejects_bad_requests() {
        let p = ModelParams::new(0.4, 1.0, 1.0);
        assert!(matches!(kernel_norm_qmc(&p, 1.0, 5, &cfg()), Err(HamError::UnsupportedOrder { .. })));
        assert!(matches!(kernel_norm_qmc(&p, 1.0, 0, &cfg()), Err(HamError::UnsupportedOrder { .. })));
        assert!(kernel_norm_qmc(&p, 1.0, 1, &QmcConfig { randomizations: 8, ..cfg() }).is_err());
        assert!(kernel_norm_qmc(&ModelParams::new(0.2, 1.0, 1.0), 1.0, 1, &cfg()).is_err());
    }
}
