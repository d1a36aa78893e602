//! Gamma-function utilities, exact simplex integrals and the elementary series
//! inequalities behind the moment bounds.
//!
//! Every Γ-ratio is evaluated in log space; no factorial is formed directly, so
//! chaos orders in the hundreds stay finite.

use serde::{Deserialize, Serialize};

use crate::error::{domain, HamError, Result};
use crate::quad::{tanh_sinh_with, TS_TAU_BOUNDED, TS_TAU_MAX};

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("log_gamma requires x > 0, got {x}"));
    }
    Ok(ln_gamma_unchecked(x))
}

#[inline]
pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// `Γ(x)` for `x > 0`.
pub fn gamma(x: f64) -> Result<f64> {
    log_gamma(x).map(f64::exp)
}

/// Exponents `(β₁, …, βₙ)` of a simplex integral, each `βⱼ > -1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexExponents {
    beta: Vec<f64>,
}

impl SimplexExponents {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() {
            return domain("simplex exponents need order n >= 1");
        }
        if let Some((j, b)) = beta.iter().enumerate().find(|(_, b)| !(**b > -1.0) || !b.is_finite()) {
            return domain(format!("simplex exponent beta[{j}] = {b} must exceed -1"));
        }
        Ok(SimplexExponents { beta })
    }

    /// `n` copies of the same exponent.
    pub fn uniform(n: usize, beta: f64) -> Result<Self> {
        Self::new(vec![beta; n])
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn order(&self) -> usize {
        self.beta.len()
    }

    /// `|β| = Σ βⱼ`.
    pub fn total(&self) -> f64 {
        self.beta.iter().sum()
    }
}

/// `ln Iₙ(t, β)`; see [`simplex_integral`].
pub fn ln_simplex_integral(t: f64, exps: &SimplexExponents) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("simplex integral requires t > 0, got {t}"));
    }
    let n = exps.order() as f64;
    let e = exps.total() + n;
    let num: f64 = exps.beta.iter().map(|b| ln_gamma_unchecked(b + 1.0)).sum();
    Ok(num - ln_gamma_unchecked(e + 1.0) + e * t.ln())
}

/// Integral over `0 < t₁ < … < tₙ < t` of `∏ (t_{j+1} - t_j)^{β_j}` with
/// `t_{n+1} = t`:
///
/// ```text
/// Iₙ(t, β) = ∏ Γ(βⱼ + 1) / Γ(|β| + n + 1) · t^{|β| + n}
/// ```
pub fn simplex_integral(t: f64, exps: &SimplexExponents) -> Result<f64> {
    ln_simplex_integral(t, exps).map(f64::exp)
}

/// A quadrature value with a conservative error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Highest order accepted by [`simplex_integral_bruteforce`].
pub const BRUTEFORCE_MAX_ORDER: usize = 5;

/// Simplex integral by nested adaptive quadrature, independent of the Gamma
/// closed form.
///
/// The integral is peeled from the outside in:
/// `Jₖ(s) = ∫₀ˢ (s-u)^{βₖ} Jₖ₋₁(u) du`, `J₀ ≡ 1`, `Iₙ(t) = Jₙ(t)`, each level
/// computed by tanh-sinh to relative tolerance `level_tol`. The error bound
/// adds the level's own estimate to the worst relative error of the inner
/// evaluations it consumed.
pub fn simplex_integral_bruteforce(
    t: f64,
    exps: &SimplexExponents,
    level_tol: f64,
) -> Result<Estimate> {
    let n = exps.order();
    if n > BRUTEFORCE_MAX_ORDER {
        return Err(HamError::UnsupportedOrder {
            order: n,
            reason: format!("brute-force simplex quadrature supports n <= {BRUTEFORCE_MAX_ORDER}"),
        });
    }
    if !(t > 0.0) {
        return domain(format!("simplex integral requires t > 0, got {t}"));
    }
    let tau_max = if exps.beta.iter().all(|b| *b >= 0.0) { TS_TAU_BOUNDED } else { TS_TAU_MAX };
    let (value, rel) = nested_level(&exps.beta, t, level_tol, tau_max)?;
    Ok(Estimate { value, error: rel * value.abs() })
}

fn nested_level(beta: &[f64], s: f64, tol: f64, tau_max: f64) -> Result<(f64, f64)> {
    let Some((&b, inner)) = beta.split_last() else {
        return Ok((1.0, 0.0));
    };
    let mut inner_rel: f64 = 0.0;
    let mut failure = None;
    let q = tanh_sinh_with(
        |u, _dl, dr| {
            if failure.is_some() {
                return 0.0;
            }
            match nested_level(inner, u, tol, tau_max) {
                Ok((v, r)) => {
                    inner_rel = inner_rel.max(r);
                    // powf dominates the innermost levels; 0 and 1 are exact shortcuts.
                    if b == 0.0 {
                        v
                    } else if b == 1.0 {
                        dr * v
                    } else {
                        dr.powf(b) * v
                    }
                }
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        0.0,
        s,
        0.0,
        tol,
        tau_max,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let rel = q.error / q.value.abs() + inner_rel;
    Ok((q.value, rel))
}

/// Truncated sum `Σ_{n=0}^{N} xⁿ/(n!)ᵖ` with a bound on the neglected tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesSum {
    pub value: f64,
    /// Upper bound on `Σ_{n>N}`; infinite when the ratio test has not kicked in.
    pub tail_bound: f64,
    pub terms: usize,
}

/// `Σ_{n=0}^{N} xⁿ/(n!)ᵖ`, summed in log space.
///
/// The tail bound is geometric, `a_N·r/(1-r)` with `r = x/(N+1)ᵖ`, valid once
/// `r < 1` since the term ratios `x/(n+1)ᵖ` decrease in `n`.
pub fn power_series_sum(x: f64, p: f64, n_max: usize) -> Result<SeriesSum> {
    if !(x >= 0.0) || !x.is_finite() {
        return domain(format!("power series needs x >= 0, got {x}"));
    }
    if !(p > 0.0) {
        return domain(format!("power series needs p > 0, got {p}"));
    }
    if n_max < 1 {
        return domain("power series needs N >= 1");
    }
    if x == 0.0 {
        return Ok(SeriesSum { value: 1.0, tail_bound: 0.0, terms: n_max + 1 });
    }
    let lx = x.ln();
    let logs: Vec<f64> = (0..=n_max)
        .map(|n| n as f64 * lx - p * ln_gamma_unchecked(n as f64 + 1.0))
        .collect();
    let value = log_sum_exp(&logs).exp();
    let r = x / ((n_max + 1) as f64).powf(p);
    let tail_bound = if r < 1.0 { logs[n_max].exp() * r / (1.0 - r) } else { f64::INFINITY };
    Ok(SeriesSum { value, tail_bound, terms: n_max + 1 })
}

/// Sums the power series until the tail bound drops below `rel_tol·value`.
pub fn power_series_sum_converged(x: f64, p: f64, rel_tol: f64) -> Result<SeriesSum> {
    // Terms peak near n ≈ x^{1/p}; start beyond that.
    let mut n = ((x.max(1.0)).powf(1.0 / p) * 2.0).ceil() as usize + 8;
    loop {
        let s = power_series_sum(x, p, n)?;
        if s.tail_bound <= rel_tol * s.value {
            return Ok(s);
        }
        if n > 1_000_000 {
            return Err(HamError::Numeric {
                what: format!("power series x={x}, p={p} did not converge"),
                estimate: s.value,
                error: s.tail_bound,
                evals: n,
            });
        }
        n *= 2;
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Explicit lower bound `c₁·exp(c₂·x^{1/p}) ≤ Σ xⁿ/(n!)ᵖ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesLowerBound {
    pub c1: f64,
    pub c2: f64,
    pub value: f64,
}

/// Constants of the lower bound for `Σ xⁿ/(n!)ᵖ`:
///
/// * `p ≤ 1`: `c₁ = 1`, `c₂ = p` (subadditivity of `y ↦ yᵖ`);
/// * `p > 1`: `c₁ = 2^{1-p}`, `c₂ = p·2^{-(p-1)/p}`.
///
/// Both branches give `eˣ` at `p = 1`.
pub fn series_lower_bound(x: f64, p: f64) -> Result<SeriesLowerBound> {
    if !(x >= 0.0) {
        return domain(format!("series lower bound needs x >= 0, got {x}"));
    }
    if !(p > 0.0) {
        return domain(format!("series lower bound needs p > 0, got {p}"));
    }
    let (c1, c2) = if p <= 1.0 {
        (1.0, p)
    } else {
        (2f64.powf(1.0 - p), p * 2f64.powf(-(p - 1.0) / p))
    };
    Ok(SeriesLowerBound { c1, c2, value: c1 * (c2 * x.powf(1.0 / p)).exp() })
}

/// `Γ(an+1) / (a^{an} · n^{(1-a)/2} · (n!)ᵃ)`.
pub fn stirling_ratio(a: f64, n: usize) -> f64 {
    let nf = n as f64;
    let ln = ln_gamma_unchecked(a * nf + 1.0)
        - a * nf * a.ln()
        - 0.5 * (1.0 - a) * nf.ln()
        - a * ln_gamma_unchecked(nf + 1.0);
    ln.exp()
}

/// `lim_{n→∞}` of [`stirling_ratio`]: `√a·(2π)^{(1-a)/2}`.
pub fn stirling_ratio_limit(a: f64) -> f64 {
    a.sqrt() * (2.0 * std::f64::consts::PI).powf(0.5 * (1.0 - a))
}

/// Maximum of [`stirling_ratio`] over `1 ≤ n ≤ n_max`.
pub fn stirling_gamma_check(a: f64, n_max: usize) -> Result<f64> {
    if !(a >= 1.0) {
        return domain(format!("Stirling check needs a >= 1, got {a}"));
    }
    if n_max < 1 {
        return domain("Stirling check needs n_max >= 1");
    }
    Ok((1..=n_max).map(|n| stirling_ratio(a, n)).fold(0.0, f64::max))
}

/// `sup_{n≥1}` of [`stirling_ratio`], taking the larger of a long scan and the
/// asymptotic limit.
pub fn stirling_constant(a: f64) -> Result<f64> {
    Ok(stirling_gamma_check(a, 4096)?.max(stirling_ratio_limit(a)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn log_gamma_values() {
        assert!(log_gamma(1.0).unwrap().abs() < 1e-15);
        assert!(log_gamma(2.0).unwrap().abs() < 1e-15);
        // ln √π to 12 digits.
        assert_relative_eq!(log_gamma(0.5).unwrap(), 0.572_364_942_924_700_1, max_relative = 1e-12);
        assert_relative_eq!(log_gamma(30.0).unwrap(), 71.257_038_967_168_01, max_relative = 1e-13);
        assert!(matches!(log_gamma(0.0), Err(HamError::Domain(_))));
        assert!(matches!(log_gamma(-2.5), Err(HamError::Domain(_))));
    }

    #[test]
    fn simplex_integral_examples() {
        let one = SimplexExponents::new(vec![0.0]).unwrap();
        assert_relative_eq!(simplex_integral(2.0, &one).unwrap(), 2.0, max_relative = 1e-14);
        let flat = SimplexExponents::new(vec![0.0, 0.0]).unwrap();
        assert_relative_eq!(simplex_integral(1.0, &flat).unwrap(), 0.5, max_relative = 1e-14);
        let lin = SimplexExponents::new(vec![1.0, 1.0]).unwrap();
        assert_relative_eq!(simplex_integral(1.0, &lin).unwrap(), 1.0 / 24.0, max_relative = 1e-13);
    }

    #[test]
    fn simplex_exponents_reject_non_integrable() {
        assert!(SimplexExponents::new(vec![0.0, -1.0]).is_err());
        assert!(SimplexExponents::new(vec![]).is_err());
        assert!(SimplexExponents::new(vec![f64::NAN]).is_err());
        assert!(SimplexExponents::new(vec![-0.999]).is_ok());
    }

    #[test]
    fn simplex_integral_survives_high_order() {
        let e = SimplexExponents::uniform(200, 0.8).unwrap();
        let v = simplex_integral(50.0, &e).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn bruteforce_matches_examples() {
        let flat = SimplexExponents::new(vec![0.0, 0.0]).unwrap();
        let r = simplex_integral_bruteforce(1.0, &flat, 1e-9).unwrap();
        assert!((r.value - 0.5).abs() <= r.error.max(1e-12));
        let lin = SimplexExponents::new(vec![1.0, 1.0]).unwrap();
        let r = simplex_integral_bruteforce(1.0, &lin, 1e-9).unwrap();
        assert!((r.value - 1.0 / 24.0).abs() < 1e-11);
        let rough = SimplexExponents::new(vec![0.8, 0.8]).unwrap();
        let r = simplex_integral_bruteforce(1.0, &rough, 1e-9).unwrap();
        let exact = simplex_integral(1.0, &rough).unwrap();
        assert_relative_eq!(r.value, exact, max_relative = 1e-6);
    }

    #[test]
    fn bruteforce_handles_negative_exponents() {
        let e = SimplexExponents::new(vec![-0.5, 0.3, -0.2]).unwrap();
        let r = simplex_integral_bruteforce(1.5, &e, 1e-9).unwrap();
        assert_relative_eq!(r.value, simplex_integral(1.5, &e).unwrap(), max_relative = 1e-6);
    }

    #[test]
    fn bruteforce_rejects_high_order() {
        let e = SimplexExponents::uniform(6, 0.0).unwrap();
        assert!(matches!(
            simplex_integral_bruteforce(1.0, &e, 1e-9),
            Err(HamError::UnsupportedOrder { order: 6, .. })
        ));
    }

    #[test]
    fn power_series_examples() {
        assert_eq!(power_series_sum(0.0, 0.7, 5).unwrap().value, 1.0);
        let e = power_series_sum(1.0, 1.0, 30).unwrap();
        assert_relative_eq!(e.value, std::f64::consts::E, max_relative = 1e-14);
        assert!(e.tail_bound < 1e-30);
        let s = power_series_sum(2.0, 0.5, 40).unwrap();
        assert!(s.value.is_finite());
        assert!(s.value >= (0.5f64 * 4.0).exp());
    }

    #[test]
    fn power_series_tail_bound_is_honest() {
        let short = power_series_sum(3.0, 1.5, 6).unwrap();
        let long = power_series_sum(3.0, 1.5, 200).unwrap();
        assert!(long.value - short.value <= short.tail_bound);
        // Ratio test not active yet: infinite bound.
        assert!(power_series_sum(50.0, 1.0, 10).unwrap().tail_bound.is_infinite());
    }

    #[test]
    fn series_lower_bound_constants() {
        let b = series_lower_bound(1.0, 1.0).unwrap();
        assert_eq!((b.c1, b.c2), (1.0, 1.0));
        assert_relative_eq!(b.value, std::f64::consts::E, max_relative = 1e-15);
        let b = series_lower_bound(4.0, 2.0).unwrap();
        assert_relative_eq!(b.c1, 0.5);
        assert_relative_eq!(b.c2, 2f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(b.value, 0.5 * (2f64.sqrt() * 2.0).exp(), max_relative = 1e-14);
        assert!((b.value - 8.46).abs() < 0.01);
        let b = series_lower_bound(1.0, 0.5).unwrap();
        assert_relative_eq!(b.value, 0.5f64.exp(), max_relative = 1e-15);
    }

    #[test]
    fn stirling_examples() {
        for n in 1..60 {
            assert_relative_eq!(stirling_ratio(1.0, n), 1.0, max_relative = 1e-11);
        }
        assert_relative_eq!(stirling_ratio(2.0, 1), 0.5, max_relative = 1e-14);
        assert!(stirling_gamma_check(0.5, 10).is_err());
        let s = stirling_gamma_check(1.8, 50).unwrap();
        assert!(s <= stirling_ratio_limit(1.8) * 1.01);
    }

    proptest! {
        #[test]
        fn simplex_scaling_law(
            beta in proptest::collection::vec(-0.9f64..3.0, 1..8),
            t in 0.01f64..20.0,
            c in 0.1f64..10.0,
        ) {
            let e = SimplexExponents::new(beta).unwrap();
            let expo = e.total() + e.order() as f64;
            let lhs = simplex_integral(c * t, &e).unwrap();
            let rhs = c.powf(expo) * simplex_integral(t, &e).unwrap();
            prop_assert!(((lhs - rhs) / rhs).abs() < 1e-12);
        }

        #[test]
        fn simplex_increasing_in_t(
            beta in proptest::collection::vec(-0.9f64..3.0, 1..8),
            t in 0.01f64..20.0,
            dt in 1e-3f64..1.0,
        ) {
            let e = SimplexExponents::new(beta).unwrap();
            prop_assert!(simplex_integral(t + dt, &e).unwrap() > simplex_integral(t, &e).unwrap());
        }

        #[test]
        fn bruteforce_agrees_low_order(
            beta in proptest::collection::vec(0.0f64..2.0, 1..4),
            t in 0.2f64..3.0,
        ) {
            let e = SimplexExponents::new(beta).unwrap();
            let exact = simplex_integral(t, &e).unwrap();
            let b = simplex_integral_bruteforce(t, &e, 1e-9).unwrap();
            prop_assert!((b.value - exact).abs() <= (1e-6 * exact).max(b.error));
        }
    }
}
