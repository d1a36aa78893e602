//! Exact synthesis of the rough noise on a space-time grid.
//!
//! Over one time step, the noise integrated against each spatial cell is a
//! vector of fractional-Brownian-motion increments scaled by `√dt`. Its lag
//! covariance is stationary, so it is embedded in a circulant matrix whose
//! eigenvalues come from one FFT; a second FFT per draw then yields two
//! independent vectors (real and imaginary parts).

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{domain, HamError, Result};

/// Relative tolerance for negative circulant eigenvalues.
pub const EIGEN_TOL: f64 = 1e-10;

/// `½(|Δ+1|^{2H} + |Δ-1|^{2H} - 2|Δ|^{2H}) dx^{2H}`.
pub fn fbm_increment_covariance(lag: i64, hurst: f64, dx: f64) -> f64 {
    let d = lag.unsigned_abs() as f64;
    let e = 2.0 * hurst;
    0.5 * ((d + 1.0).powf(e) + (d - 1.0).abs().powf(e) - 2.0 * d.powf(e)) * dx.powf(e)
}

/// Circulant-embedding sampler for `n` consecutive cells of width `dx`.
#[derive(Clone)]
pub struct NoiseSynthesizer {
    n: usize,
    /// `√(λ_k / N)` per embedding frequency.
    amp: Vec<f64>,
    fft: Option<Arc<dyn Fft<f64>>>,
    /// Standard deviation per cell when `n = 1`.
    sd1: f64,
}

impl std::fmt::Debug for NoiseSynthesizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NoiseSynthesizer").field("n", &self.n).field("embedding", &self.amp.len()).finish()
    }
}

impl NoiseSynthesizer {
    pub fn new(n: usize, dx: f64, hurst: f64) -> Result<Self> {
        if n == 0 {
            return domain("noise synthesis needs at least one cell");
        }
        if !(hurst > 0.0 && hurst < 0.5) {
            return domain(format!("noise synthesis needs 0 < H < 1/2, got {hurst}"));
        }
        if !(dx > 0.0) {
            return domain("cell width must be positive");
        }
        let sd1 = fbm_increment_covariance(0, hurst, dx).sqrt();
        if n == 1 {
            return Ok(NoiseSynthesizer { n, amp: Vec::new(), fft: None, sd1 });
        }
        let big_n = 2 * (n - 1);
        let mut row: Vec<Complex64> = (0..big_n)
            .map(|i| {
                let lag = if i < n { i } else { big_n - i };
                Complex64::new(fbm_increment_covariance(lag as i64, hurst, dx), 0.0)
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(big_n);
        fft.process(&mut row);
        let max = row.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
        let min = row.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        if min < -EIGEN_TOL * max {
            return Err(HamError::Synthesis { eigenvalue: min, max });
        }
        let amp = row.iter().map(|c| (c.re.max(0.0) / big_n as f64).sqrt()).collect();
        Ok(NoiseSynthesizer { n, amp, fft: Some(fft), sd1 })
    }

    pub fn cells(&self) -> usize {
        self.n
    }

    /// Two independent draws, each scaled by `scale` (`√dt` for one step).
    /// `buf` is scratch of the embedding size; it is resized as needed.
    pub fn fill_pair<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        scale: f64,
        a: &mut [f64],
        b: &mut [f64],
        buf: &mut Vec<Complex64>,
    ) {
        debug_assert!(a.len() == self.n && b.len() == self.n);
        let Some(fft) = &self.fft else {
            let s = scale * self.sd1;
            a[0] = s * rng.sample::<f64, _>(StandardNormal);
            b[0] = s * rng.sample::<f64, _>(StandardNormal);
            return;
        };
        buf.resize(self.amp.len(), Complex64::new(0.0, 0.0));
        for (c, &amp) in buf.iter_mut().zip(&self.amp) {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *c = Complex64::new(amp * re, amp * im);
        }
        fft.process(buf);
        for i in 0..self.n {
            a[i] = scale * buf[i].re;
            b[i] = scale * buf[i].im;
        }
    }
}

/// One noise vector `w[m]` for a single step of length `dt`.
///
/// The step index only selects the random stream; the caller supplies a stream
/// keyed by it. Solvers use [`NoiseSynthesizer::fill_pair`] to obtain two steps
/// per transform.
pub fn synthesize_noise_step<R: Rng + ?Sized>(synth: &NoiseSynthesizer, dt: f64, rng: &mut R) -> Vec<f64> {
    let mut a = vec![0.0; synth.cells()];
    let mut b = vec![0.0; synth.cells()];
    synth.fill_pair(rng, dt.sqrt(), &mut a, &mut b, &mut Vec::new());
    a
}
