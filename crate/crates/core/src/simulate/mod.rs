//! Monte Carlo solver for the mild Itô equation
//!
//! ```text
//! u(t,x) = η + λ ∫₀ᵗ ∫ G(t-s, x-y) u(s,y) X(ds,dy),   G(t,x) = ½·1_{|x|<t},
//! ```
//!
//! discretised as
//!
//! ```text
//! u[k+1,m] = η + Σ_{j≤k} Σ_{m'} ½ ω_{kj}(m,m') λ u[j,m'] w_j[m'].
//! ```
//!
//! Cell `m` is centred at `x_m = -L + m·dx` (so `m = 0..=M`), `w_j[m']` is the
//! noise mass of step `j` on cell `m'`, the integrand is taken at the left end
//! of each step, and `ω_{kj}(m,m')` is the fraction of cell `m'` inside the
//! cone `|x_m - y| < ρ` with the step-midpoint radius `ρ = t_{k+1} - t_j - dt/2`.
//!
//! With `dt = dx` every cone ends on a cell face and the Duhamel sum obeys the
//! discrete d'Alembert recurrence
//! `S_{k+1}(m) = S_k(m-1) + S_k(m+1) - S_{k-1}(m) + z_k(m) + z_{k-1}(m)`,
//! `z_j = ½λ u[j] w_j`, which costs `O(M)` per step. Other ratios use prefix
//! sums with fractional boundary cells, `O(kM)` per step.

mod dump;
mod noise;
mod stats;

pub use dump::{read_field_dump, write_field_dump, DUMP_MAGIC, DUMP_VERSION};
pub use noise::{fbm_increment_covariance, synthesize_noise_step, NoiseSynthesizer, EIGEN_TOL};
pub use stats::{
    estimate_moments, fit_lyapunov, moments_csv, pairwise_sum, LyapunovEstimate, MomentRow, MomentTable,
};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HamError, Result};
use crate::rng::{stream, Domain};
use crate::spectral::{Kernel, ModelParams};

/// Space-time grid and master seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dt: f64,
    /// Final time `T`.
    pub horizon: f64,
    pub dx: f64,
    /// Half-width `L` of the spatial domain.
    pub half_width: f64,
    pub seed: u64,
}

const GRID_TOL: f64 = 1e-9;

fn exact_ratio(num: f64, den: f64, what: &str) -> Result<usize> {
    let r = num / den;
    let k = r.round();
    if !(k >= 0.0) || (r - k).abs() > GRID_TOL * k.max(1.0) {
        return Err(HamError::Config(format!("{what} = {r} is not an integer")));
    }
    Ok(k as usize)
}

impl GridSpec {
    pub fn new(dt: f64, horizon: f64, dx: f64, half_width: f64, seed: u64) -> Self {
        GridSpec { dt, horizon, dx, half_width, seed }
    }

    pub fn validate(&self) -> Result<()> {
        for (v, name) in [(self.dt, "dt"), (self.dx, "dx")] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(HamError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.horizon > 0.0) || !(self.half_width >= 0.0) {
            return Err(HamError::Config("T must be positive and L nonnegative".into()));
        }
        self.steps()?;
        self.cells()?;
        Ok(())
    }

    /// `K = T/dt`.
    pub fn steps(&self) -> Result<usize> {
        exact_ratio(self.horizon, self.dt, "T/dt")
    }

    /// `M = 2L/dx`; there are `M + 1` cells.
    pub fn cells(&self) -> Result<usize> {
        exact_ratio(2.0 * self.half_width, self.dx, "2L/dx")
    }

    pub fn x(&self, m: usize) -> f64 {
        -self.half_width + m as f64 * self.dx
    }

    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Cell index of an on-grid position.
    pub fn cell_of(&self, x: f64) -> Result<usize> {
        let r = (x + self.half_width) / self.dx;
        let m = r.round();
        let cells = self.cells()?;
        if (r - m).abs() > GRID_TOL * m.abs().max(1.0) || m < 0.0 || m as usize > cells {
            return Err(HamError::Config(format!("observation point x = {x} is not a grid point")));
        }
        Ok(m as usize)
    }

    /// Step index of an on-grid time.
    pub fn step_of(&self, t: f64) -> Result<usize> {
        let k = exact_ratio(t, self.dt, "t/dt")?;
        if k > self.steps()? {
            return Err(HamError::Config(format!("time {t} beyond the horizon {}", self.horizon)));
        }
        Ok(k)
    }

    /// `L ≥ |x| + T`: the backward light cone of `(T, x)` lies in the domain.
    pub fn check_light_cone(&self, x: f64) -> Result<()> {
        if self.half_width + GRID_TOL * self.half_width.max(1.0) < x.abs() + self.horizon {
            return Err(HamError::Config(format!(
                "light cone violated: L = {} < |x| + T = {}",
                self.half_width,
                x.abs() + self.horizon
            )));
        }
        Ok(())
    }

    /// Whether the characteristic recurrence applies (`dt = dx`).
    pub fn characteristic(&self) -> bool {
        (self.dt - self.dx).abs() <= 1e-12 * self.dx
    }
}

/// What the solver keeps of each sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Recording {
    /// `u` at the given positions for every step.
    Points(Vec<f64>),
    /// Every cell at every step.
    Full,
}

/// Duhamel-sum evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Characteristic recurrence when `dt = dx`, prefix sums otherwise.
    Auto,
    /// Always prefix sums.
    PrefixSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub recording: Recording,
    pub scheme: Scheme,
    /// `Some(p)`: `p` Picard sweeps `u⁽ⁱ⁺¹⁾ = η + Duhamel(u⁽ⁱ⁾)` from `u⁽⁰⁾ = η`
    /// over the whole horizon with shared noise. `None`: causal time stepping.
    pub picard_sweeps: Option<usize>,
    /// Zero the noise on cells with `|x_m| > r`.
    pub noise_radius: Option<f64>,
}

impl SolverConfig {
    pub fn points(xs: Vec<f64>) -> Self {
        SolverConfig { recording: Recording::Points(xs), scheme: Scheme::Auto, picard_sweeps: None, noise_radius: None }
    }

    pub fn full() -> Self {
        SolverConfig { recording: Recording::Full, ..Self::points(Vec::new()) }
    }
}

/// Samples of `u` on the recorded columns, laid out `[sample][step][column]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldEnsemble {
    pub grid: GridSpec,
    pub params: ModelParams,
    pub samples: usize,
    pub scheme: String,
    /// Positions of the recorded columns.
    pub columns: Vec<f64>,
    pub steps: usize,
    pub values: Vec<f64>,
}

impl FieldEnsemble {
    pub fn value(&self, sample: usize, step: usize, column: usize) -> f64 {
        let c = self.columns.len();
        self.values[(sample * (self.steps + 1) + step) * c + column]
    }

    pub fn column_of(&self, x: f64) -> Result<usize> {
        let tol = 1e-9 * self.grid.dx;
        self.columns
            .iter()
            .position(|c| (c - x).abs() <= tol)
            .ok_or_else(|| HamError::Config(format!("position {x} was not recorded")))
    }

    /// All samples at one `(step, column)`.
    pub fn samples_at(&self, step: usize, column: usize) -> Vec<f64> {
        (0..self.samples).map(|s| self.value(s, step, column)).collect()
    }
}

/// Runs `samples` independent realisations.
///
/// Sample `s` draws its noise from streams keyed by `(seed, s, step pair)`, so
/// the ensemble is bitwise reproducible for any worker count.
pub fn run_solver(grid: &GridSpec, params: &ModelParams, samples: usize, cfg: &SolverConfig) -> Result<FieldEnsemble> {
    grid.validate()?;
    if params.kernel != Kernel::Wave {
        return Err(HamError::Config("the simulator implements the wave kernel only".into()));
    }
    params.require_standard()?;
    if samples == 0 {
        return Err(HamError::Config("need at least one sample".into()));
    }
    let steps = grid.steps()?;
    let m_max = grid.cells()?;
    let columns: Vec<usize> = match &cfg.recording {
        Recording::Full => (0..=m_max).collect(),
        Recording::Points(xs) => {
            if xs.is_empty() {
                return Err(HamError::Config("no observation points".into()));
            }
            xs.iter()
                .map(|&x| {
                    grid.check_light_cone(x)?;
                    grid.cell_of(x)
                })
                .collect::<Result<_>>()?
        }
    };
    if let Some(r) = cfg.noise_radius {
        if !(r >= 0.0) {
            return Err(HamError::Config("noise radius must be nonnegative".into()));
        }
    }
    let synth = NoiseSynthesizer::new(m_max + 1, grid.dx, params.hurst)?;
    let characteristic = cfg.scheme == Scheme::Auto && grid.characteristic();
    let scheme = match (characteristic, cfg.picard_sweeps) {
        (true, None) => "characteristic".to_string(),
        (false, None) => "prefix_sum".to_string(),
        (true, Some(p)) => format!("characteristic_picard_{p}"),
        (false, Some(p)) => format!("prefix_sum_picard_{p}"),
    };
    let mask: Option<Vec<bool>> = cfg.noise_radius.map(|r| (0..=m_max).map(|m| grid.x(m).abs() <= r).collect());
    let ctx = SampleCtx {
        grid: *grid,
        params: *params,
        steps,
        cells: m_max + 1,
        synth,
        characteristic,
        sweeps: cfg.picard_sweeps,
        mask,
        columns: &columns,
    };
    let per_sample: Vec<Vec<f64>> = (0..samples).into_par_iter().map(|s| ctx.run(s as u64)).collect();
    let mut values = Vec::with_capacity(samples * (steps + 1) * columns.len());
    for v in per_sample {
        values.extend_from_slice(&v);
    }
    Ok(FieldEnsemble {
        grid: *grid,
        params: *params,
        samples,
        scheme,
        columns: columns.iter().map(|&m| grid.x(m)).collect(),
        steps,
        values,
    })
}

struct SampleCtx<'a> {
    grid: GridSpec,
    params: ModelParams,
    steps: usize,
    cells: usize,
    synth: NoiseSynthesizer,
    characteristic: bool,
    sweeps: Option<usize>,
    mask: Option<Vec<bool>>,
    columns: &'a [usize],
}

impl SampleCtx<'_> {
    fn run(&self, sample: u64) -> Vec<f64> {
        let (k_max, n) = (self.steps, self.cells);
        let eta = self.params.eta;
        let mut out = Vec::with_capacity((k_max + 1) * self.columns.len());
        if self.params.lambda == 0.0 {
            out.resize((k_max + 1) * self.columns.len(), eta);
            return out;
        }
        let noise = self.noise(sample);
        let record = |out: &mut Vec<f64>, u: &[f64]| out.extend(self.columns.iter().map(|&m| u[m]));
        match self.sweeps {
            None => {
                let mut stepper = Stepper::new(self, n);
                let mut u = vec![eta; n];
                record(&mut out, &u);
                for k in 0..k_max {
                    stepper.advance(self, k, &u, &noise[k * n..(k + 1) * n]);
                    stepper.field(eta, &mut u);
                    record(&mut out, &u);
                }
            }
            Some(p) => {
                let mut prev = vec![eta; (k_max + 1) * n];
                let mut next = prev.clone();
                for _ in 0..p {
                    let mut stepper = Stepper::new(self, n);
                    for k in 0..k_max {
                        stepper.advance(self, k, &prev[k * n..(k + 1) * n], &noise[k * n..(k + 1) * n]);
                        stepper.field(eta, &mut next[(k + 1) * n..(k + 2) * n]);
                    }
                    std::mem::swap(&mut prev, &mut next);
                }
                for k in 0..=k_max {
                    record(&mut out, &prev[k * n..(k + 1) * n]);
                }
            }
        }
        out
    }

    /// Noise for all steps, `[step][cell]`, two steps per circulant draw.
    fn noise(&self, sample: u64) -> Vec<f64> {
        let (k_max, n) = (self.steps, self.cells);
        let mut w = vec![0.0; (k_max + k_max % 2) * n];
        let mut buf: Vec<Complex64> = Vec::new();
        let scale = self.grid.dt.sqrt();
        for (pair, chunk) in w.chunks_mut(2 * n).enumerate() {
            let mut rng = stream(self.grid.seed, Domain::Noise, sample, pair as u64);
            let (a, b) = chunk.split_at_mut(n);
            self.synth.fill_pair(&mut rng, scale, a, b, &mut buf);
        }
        w.truncate(k_max * n);
        if let Some(mask) = &self.mask {
            for row in w.chunks_mut(n) {
                for (v, &keep) in row.iter_mut().zip(mask) {
                    if !keep {
                        *v = 0.0;
                    }
                }
            }
        }
        w
    }
}

/// Incremental Duhamel sum `S_{k+1} = Σ_{j≤k} window_{kj}(z_j)`.
struct Stepper {
    half_lambda: f64,
    /// Characteristic path: `S_{k-1}`, `S_k`, `z_{k-1}`.
    s_prev: Vec<f64>,
    s_cur: Vec<f64>,
    z_prev: Vec<f64>,
    /// Prefix path: prefix sums of every past `z_j`, `[j][0..=n]`.
    prefix: Vec<Vec<f64>>,
    step: usize,
}

impl Stepper {
    fn new(ctx: &SampleCtx<'_>, n: usize) -> Self {
        Stepper {
            half_lambda: 0.5 * ctx.params.lambda,
            s_prev: vec![0.0; n],
            s_cur: vec![0.0; n],
            z_prev: vec![0.0; n],
            prefix: Vec::new(),
            step: 0,
        }
    }

    /// Adds step `k` with integrand `u_k` and noise `w_k`.
    fn advance(&mut self, ctx: &SampleCtx<'_>, k: usize, u_k: &[f64], w_k: &[f64]) {
        debug_assert_eq!(k, self.step);
        let n = u_k.len();
        let z: Vec<f64> = u_k.iter().zip(w_k).map(|(u, w)| self.half_lambda * u * w).collect();
        if ctx.characteristic {
            let mut next = vec![0.0; n];
            if k == 0 {
                next.copy_from_slice(&z);
            } else {
                for m in 0..n {
                    let left = if m > 0 { self.s_cur[m - 1] } else { 0.0 };
                    let right = if m + 1 < n { self.s_cur[m + 1] } else { 0.0 };
                    next[m] = left + right - self.s_prev[m] + z[m] + self.z_prev[m];
                }
            }
            self.s_prev = std::mem::replace(&mut self.s_cur, next);
            self.z_prev = z;
        } else {
            let mut p = Vec::with_capacity(n + 1);
            p.push(0.0);
            let mut acc = 0.0;
            for v in &z {
                acc += v;
                p.push(acc);
            }
            self.prefix.push(p);
            let (dt, dx) = (ctx.grid.dt, ctx.grid.dx);
            let mut s = vec![0.0; n];
            for (j, pj) in self.prefix.iter().enumerate() {
                let rho = ((k - j) as f64 + 0.5) * dt / dx;
                for (m, sm) in s.iter_mut().enumerate() {
                    *sm += window_sum(pj, m, rho);
                }
            }
            self.s_cur = s;
        }
        self.step += 1;
    }

    /// `u_{k+1} = η + S_{k+1}`.
    fn field(&self, eta: f64, out: &mut [f64]) {
        for (o, s) in out.iter_mut().zip(&self.s_cur) {
            *o = eta + s;
        }
    }
}

/// Sum of `z` over the cone `(m - ρ, m + ρ)` in cell units, cells weighted by
/// their overlap with the cone. `p` is the prefix sum with `p[0] = 0`.
fn window_sum(p: &[f64], m: usize, rho: f64) -> f64 {
    let n = p.len() - 1;
    let z = |i: isize| -> f64 {
        if i < 0 || i as usize >= n {
            0.0
        } else {
            p[i as usize + 1] - p[i as usize]
        }
    };
    let mi = m as isize;
    let h = (rho - 0.5).floor();
    if h < 0.0 {
        return 2.0 * rho * z(mi);
    }
    let h = h as isize;
    let frac = rho - 0.5 - h as f64;
    let lo = (mi - h).max(0) as usize;
    let hi = ((mi + h) as usize).min(n - 1);
    let full = p[hi + 1] - p[lo];
    if frac > 0.0 {
        full + frac * (z(mi - h - 1) + z(mi + h + 1))
    } else {
        full
    }
}
