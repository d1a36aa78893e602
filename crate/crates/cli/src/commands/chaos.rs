use ham_core::chaos::{
    brackets_csv, fit_p_moment_envelope, kernel_norm_qmc, kernel_norm_upper, lyapunov_bracket, p_moment_upper,
    second_moment_series_with, ChaosCoefficients, EnvelopeFit, LyapunovBracket, PMomentSummary, TermEstimate,
};
use ham_core::{ModelParams, QmcConfig, QmcEstimate};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::Emitter;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QmcRow {
    pub order: usize,
    pub estimate: QmcEstimate,
}

/// Contents of `chaos_summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChaosReport {
    pub params: ModelParams,
    pub horizon: f64,
    pub truncation: usize,
    pub lower_sum: f64,
    pub upper_sum: f64,
    pub tail_bound: f64,
    /// First chaos term in closed form.
    pub first_term: f64,
    pub qmc: Vec<QmcRow>,
    pub p_moments: Vec<PMomentSummary>,
    pub lyapunov: Vec<LyapunovBracket>,
    pub envelopes: Vec<EnvelopeFit>,
}

pub fn model_params(cfg: &RunConfig) -> CliResult<ModelParams> {
    Ok(ModelParams::new(cfg.float("H")?, cfg.float("lambda")?, cfg.float("eta")?).with_kernel(cfg.kernel("kernel")?))
}

/// `window_points` equispaced times spanning the configured window.
pub fn window_grid(cfg: &RunConfig) -> CliResult<Option<Vec<f64>>> {
    let Some(w) = cfg.opt_list("window")? else { return Ok(None) };
    if w.len() != 2 || !(w[0] > 0.0 && w[1] > w[0]) {
        return Err(CliError::Config("window must be 'start,end' with 0 < start < end".into()));
    }
    let k = cfg.int("window_points")? as usize;
    if k < 3 {
        return Err(CliError::Config("window_points must be at least 3".into()));
    }
    Ok(Some((0..k).map(|i| w[0] + (w[1] - w[0]) * i as f64 / (k - 1) as f64).collect()))
}

pub fn run(cfg: &RunConfig, out: &mut Emitter) -> CliResult<()> {
    let params = model_params(cfg)?;
    params.require_standard()?;
    params.require_nontrivial()?;
    let t = cfg.float("t")?;
    if !(t > 0.0) {
        return Err(CliError::Config(format!("horizon must be positive, got {t}")));
    }
    let ps = cfg.list("p")?;
    if let Some(p) = ps.iter().find(|p| !(**p >= 2.0)) {
        return Err(CliError::Config(format!("chaos moment bounds need p >= 2, got {p}")));
    }
    let qmc_n = cfg.int("qmc_n")? as usize;
    if qmc_n > 4 {
        return Err(CliError::Config(format!("qmc_n = {qmc_n}: QMC supports orders up to 4")));
    }
    let window = window_grid(cfg)?;

    let coeffs = ChaosCoefficients::new(params.hurst, params.kernel)?;
    let mut series = second_moment_series_with(&params, t, cfg.float("series_tol")?, &coeffs)?;

    let qcfg = QmcConfig {
        points: cfg.int("qmc_points")? as usize,
        randomizations: cfg.int("qmc_randomizations")? as usize,
        seed: cfg.int("seed")?,
        max_points: (cfg.int("qmc_points")? as usize).max(1 << 20),
        ..QmcConfig::default()
    };
    let mut qmc = Vec::new();
    for n in 1..=qmc_n {
        let e = kernel_norm_qmc(&params, t, n, &qcfg)?;
        if let Some(w) = &e.warning {
            eprintln!("warning: order {n}: {w}");
        }
        if let Some(row) = series.per_term.get_mut(n) {
            row.estimate = Some(TermEstimate { value: e.value, se: e.se });
        }
        qmc.push(QmcRow { order: n, estimate: e });
    }
    out.emit("chaos_terms.csv", brackets_csv(&series.per_term).as_bytes())?;

    let p_moments = ps
        .iter()
        .map(|&p| Ok(PMomentSummary { p, upper: p_moment_upper(&params, t, p)? }))
        .collect::<CliResult<Vec<_>>>()?;
    let (lyapunov, envelopes) = match &window {
        None => (Vec::new(), Vec::new()),
        Some(grid) => {
            let mut ly = Vec::new();
            let mut env = Vec::new();
            for &p in &ps {
                ly.push(lyapunov_bracket(&params, p, grid)?);
                env.push(fit_p_moment_envelope(&params, p, grid)?);
            }
            (ly, env)
        }
    };

    let report = ChaosReport {
        params,
        horizon: t,
        truncation: series.truncation,
        lower_sum: series.lower_sum,
        upper_sum: series.upper_sum,
        tail_bound: series.tail_bound,
        first_term: kernel_norm_upper(&params, t, 1)?,
        qmc,
        p_moments,
        lyapunov,
        envelopes,
    };
    out.emit_json("chaos_summary.json", &report)?;

    for row in &series.per_term {
        row.check().map_err(CliError::from)?;
    }
    Ok(())
}
