//! One-dimensional quadrature rules used by the spectral and simplex routines.
//!
//! Two engines live here:
//!
//! * [`gauss_kronrod`]: globally adaptive 21-point Gauss-Kronrod (QUADPACK `qag`
//!   style bisection with a priority queue on the local error). Best for smooth
//!   integrands on panels, e.g. one oscillation period of `sin²`.
//! * [`tanh_sinh`]: double-exponential quadrature with level refinement. Handles
//!   algebraic endpoint singularities `(x-a)^β`, `β > -1`, without subdivision.
//!   The integrand receives the distances to both endpoints, computed without
//!   cancellation, so `(b-x)^β` stays accurate next to `b`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::error::{HamError, Result};

/// Value and error estimate of a quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

impl QuadResult {
    pub fn zero() -> Self {
        QuadResult { value: 0.0, error: 0.0, evals: 0 }
    }
}

impl std::ops::Add for QuadResult {
    type Output = QuadResult;
    fn add(self, rhs: QuadResult) -> QuadResult {
        QuadResult {
            value: self.value + rhs.value,
            error: self.error + rhs.error,
            evals: self.evals + rhs.evals,
        }
    }
}

impl std::iter::Sum for QuadResult {
    fn sum<I: Iterator<Item = QuadResult>>(iter: I) -> QuadResult {
        iter.fold(QuadResult::zero(), |a, b| a + b)
    }
}

// Kronrod abscissae and weights for the 21-point rule; the Gauss 10-point rule
// uses the odd-indexed abscissae.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_652_568_286_911,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Single application of the 21-point Gauss-Kronrod rule on `[a, b]`.
pub fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> QuadResult {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - reskh).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let value = resk * half;
    let resasc = resasc * half.abs();
    let mut error = ((resk - resg) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    let roundoff = 50.0 * f64::EPSILON * value.abs();
    QuadResult { value, error: error.max(roundoff), evals: 21 }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    res: QuadResult,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.res.error == other.res.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.res.error.total_cmp(&other.res.error)
    }
}

/// Globally adaptive Gauss-Kronrod quadrature on a finite interval.
///
/// Stops when the summed error estimate is below `max(abs_tol, rel_tol·|I|)`.
pub fn gauss_kronrod<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult::zero());
    }
    let first = gk21(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, res: first });
    let mut total = first;
    while total.error > abs_tol.max(rel_tol * total.value.abs()) {
        if heap.len() >= max_panels {
            return Err(HamError::Numeric {
                what: format!("Gauss-Kronrod on [{a}, {b}] exceeded {max_panels} panels"),
                estimate: total.value,
                error: total.error,
                evals: total.evals,
            });
        }
        let worst = heap.pop().expect("heap never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let left = gk21(&mut f, worst.a, mid);
        let right = gk21(&mut f, mid, worst.b);
        total.value += left.value + right.value - worst.res.value;
        total.error += left.error + right.error - worst.res.error;
        total.evals += 42;
        heap.push(Panel { a: worst.a, b: mid, res: left });
        heap.push(Panel { a: mid, b: worst.b, res: right });
        if total.error <= abs_tol.max(rel_tol * total.value.abs()) {
            // Recompute from the panels to shed accumulated cancellation.
            let (v, e) = heap
                .iter()
                .fold((0.0, 0.0), |(v, e), p| (v + p.res.value, e + p.res.error));
            total.value = v;
            total.error = e;
        }
    }
    Ok(total)
}

/// Default largest `|τ|` of the tanh-sinh rule. At `τ = 4.5` the outermost node
/// sits about `e^{-141}` (relative) from the endpoint, enough for `(x-a)^β`
/// with `β` close to `-1`.
pub const TS_TAU_MAX: f64 = 4.5;
/// Cheaper cutoff for integrands that stay bounded at both endpoints; the
/// outermost node is then `e^{-31}` from the endpoint.
pub const TS_TAU_BOUNDED: f64 = 3.0;
const TS_MAX_LEVEL: usize = 12;

/// One tanh-sinh abscissa on `[0, 1]`: `small + big = 1` are the distances to
/// the near and far endpoint, `weight` the Jacobian without the `h·width` factor.
struct TsNode {
    tau: f64,
    small: f64,
    big: f64,
    weight: f64,
}

/// Nodes with `0 ≤ τ ≤ TS_TAU_MAX` per level, ascending in `τ`. Level 0 holds
/// the integer `τ`; level `l` the odd multiples of `2^{-l}`. Nested quadrature
/// revisits the same abscissae millions of times, hence the table.
fn ts_nodes() -> &'static [Vec<TsNode>] {
    static NODES: OnceLock<Vec<Vec<TsNode>>> = OnceLock::new();
    NODES.get_or_init(|| {
        let node = |tau: f64| {
            let y = std::f64::consts::FRAC_PI_2 * tau.sinh();
            let e = (-2.0 * y).exp();
            let small = e / (1.0 + e);
            let big = 1.0 / (1.0 + e);
            // σ(1-σ) written without cancellation.
            let weight = std::f64::consts::FRAC_PI_2 * tau.cosh() * 2.0 * small * big;
            TsNode { tau, small, big, weight }
        };
        (0..=TS_MAX_LEVEL)
            .map(|l| {
                let h = 0.5f64.powi(l as i32);
                let (first, step) = if l == 0 { (0, 1) } else { (1, 2) };
                (first..)
                    .step_by(step)
                    .map(|k| k as f64 * h)
                    .take_while(|&tau| tau <= TS_TAU_MAX)
                    .map(node)
                    .collect()
            })
            .collect()
    })
}

/// Tanh-sinh quadrature on `[a, b]` for integrands with endpoint singularities.
///
/// `f(x, x - a, b - x)` receives both endpoint distances. Levels halve the step
/// until two successive estimates agree to `max(abs_tol, rel_tol·|I|)`; the
/// reported error is that difference.
pub fn tanh_sinh<F: FnMut(f64, f64, f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadResult> {
    tanh_sinh_with(f, a, b, abs_tol, rel_tol, TS_TAU_MAX)
}

/// [`tanh_sinh`] with an explicit node cutoff `tau_max ≤ TS_TAU_MAX`.
pub fn tanh_sinh_with<F: FnMut(f64, f64, f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    tau_max: f64,
) -> Result<QuadResult> {
    let width = b - a;
    if width == 0.0 {
        return Ok(QuadResult::zero());
    }
    let mut eval = |node: &TsNode, right: bool| -> f64 {
        let (dl, dr) = if right {
            (width * node.big, width * node.small)
        } else {
            (width * node.small, width * node.big)
        };
        let x = if right { b - dr } else { a + dl };
        let jac = width * node.weight;
        if jac == 0.0 || dl <= 0.0 || dr <= 0.0 {
            return 0.0;
        }
        f(x, dl, dr) * jac
    };

    let levels = ts_nodes();
    let mut h = 1.0;
    let mut sum = 0.0;
    let mut evals = 0;
    for node in levels[0].iter().take_while(|n| n.tau <= tau_max) {
        if node.tau == 0.0 {
            sum += eval(node, true);
            evals += 1;
        } else {
            sum += eval(node, true) + eval(node, false);
            evals += 2;
        }
    }
    let mut prev = sum * h;
    for level in &levels[1..] {
        h *= 0.5;
        for node in level.iter().take_while(|n| n.tau <= tau_max) {
            sum += eval(node, true) + eval(node, false);
            evals += 2;
        }
        let cur = sum * h;
        let diff = (cur - prev).abs();
        if !cur.is_finite() {
            break;
        }
        if diff <= abs_tol.max(rel_tol * cur.abs()) && h < 0.2 {
            return Ok(QuadResult { value: cur, error: diff, evals });
        }
        prev = cur;
    }
    Err(HamError::Numeric {
        what: format!("tanh-sinh on [{a}, {b}] did not converge"),
        estimate: prev,
        error: f64::NAN,
        evals,
    })
}

/// Convenience wrapper for integrands that only need `x`.
pub fn tanh_sinh_x<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadResult> {
    tanh_sinh(|x, _, _| f(x), a, b, abs_tol, rel_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk21_exact_for_polynomials() {
        let r = gk21(&mut |x: f64| x.powi(20), 0.0, 1.0);
        assert!((r.value - 1.0 / 21.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_gk_on_peaked_integrand() {
        let r = gauss_kronrod(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 0.0, 1e-12, 500).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((r.value - exact).abs() / exact < 1e-11);
    }

    #[test]
    fn tanh_sinh_endpoint_singularities() {
        // ∫_0^1 x^{-1/2} (1-x)^{-1/2} dx = π
        let r = tanh_sinh(|_, l, rr| l.powf(-0.5) * rr.powf(-0.5), 0.0, 1.0, 0.0, 1e-12).unwrap();
        assert!((r.value - std::f64::consts::PI).abs() < 1e-10, "{r:?}");
        // ∫_0^2 ln x dx = 2 ln 2 - 2
        let r = tanh_sinh_x(|x| x.ln(), 0.0, 2.0, 0.0, 1e-12).unwrap();
        assert!((r.value - (2.0 * 2f64.ln() - 2.0)).abs() < 1e-11);
    }

    #[test]
    fn gk_reports_panel_exhaustion() {
        let err = gauss_kronrod(|x: f64| (1.0 / x).sin() / x, 1e-12, 1.0, 0.0, 1e-14, 8).unwrap_err();
        assert!(matches!(err, HamError::Numeric { .. }));
    }
}
