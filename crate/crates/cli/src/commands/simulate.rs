use ham_core::chaos::{p_moment_upper, second_moment_series};
use ham_core::simulate::{
    estimate_moments, fit_lyapunov, moments_csv, run_solver, write_field_dump, MomentTable, Recording,
};
use ham_core::{GridSpec, LyapunovEstimate, SolverConfig};
use serde::{Deserialize, Serialize};

use super::chaos::model_params;
use crate::config::{RunConfig, Value};
use crate::error::{CliError, CliResult};
use crate::manifest::Emitter;

/// Default moment-table rows per observation point and order.
const DEFAULT_ROWS: usize = 64;

/// One simulated moment compared against its series bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BracketCheck {
    pub x: f64,
    pub p: f64,
    pub t: f64,
    pub estimate: f64,
    pub se: f64,
    /// `None` for orders with only an upper bound.
    pub lower: Option<f64>,
    pub upper: f64,
    pub allowance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LyapunovRow {
    pub p: f64,
    pub x: f64,
    pub fit: Option<LyapunovEstimate>,
    /// Why no fit was produced.
    pub refused: Option<String>,
}

/// Contents of `simulate_summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateReport {
    pub params: ham_core::ModelParams,
    pub grid: GridSpec,
    pub scheme: String,
    pub samples: usize,
    pub warnings: Vec<String>,
    pub brackets: Vec<BracketCheck>,
    pub lyapunov: Vec<LyapunovRow>,
}

/// `0.05`, doubled below `H = 0.35`.
pub fn default_allowance(hurst: f64) -> f64 {
    if hurst < 0.35 { 0.10 } else { 0.05 }
}

/// Fills `L`, `moment_stride` and `allowance` when unset.
pub fn resolve(cfg: &mut RunConfig) -> CliResult<()> {
    let (t, dt, dx) = (cfg.float("t")?, cfg.float("dt")?, cfg.float("dx")?);
    if !(t > 0.0 && dt > 0.0 && dx > 0.0) {
        return Err(CliError::Config("t, dt and dx must be positive".into()));
    }
    if !cfg.contains("L") {
        let reach = cfg.list("obs_x")?.iter().fold(0.0f64, |m, x| m.max(x.abs())) + t;
        let half_cells = (reach / dx - 1e-9).ceil().max(0.0);
        cfg.set_value("L", Value::Float(half_cells * dx))?;
    }
    if !cfg.contains("moment_stride") {
        let steps = (t / dt).round().max(1.0) as usize;
        cfg.set_value("moment_stride", Value::Int(steps.div_ceil(DEFAULT_ROWS).max(1) as u64))?;
    }
    if !cfg.contains("allowance") {
        cfg.set_value("allowance", Value::Float(default_allowance(cfg.float("H")?)))?;
    }
    Ok(())
}

/// Row times: every `stride` steps, plus the horizon.
fn moment_steps(steps: usize, stride: usize) -> Vec<usize> {
    let mut ks: Vec<usize> = (0..=steps).step_by(stride.max(1)).collect();
    if ks.last() != Some(&steps) {
        ks.push(steps);
    }
    ks
}

pub fn run(cfg: &RunConfig, out: &mut Emitter) -> CliResult<()> {
    let params = model_params(cfg)?;
    let grid = GridSpec::new(cfg.float("dt")?, cfg.float("t")?, cfg.float("dx")?, cfg.float("L")?, cfg.int("seed")?);
    grid.validate()?;
    let xs = cfg.list("obs_x")?;
    if xs.is_empty() {
        return Err(CliError::Config("obs_x is empty".into()));
    }
    for &x in &xs {
        grid.check_light_cone(x)?;
        grid.cell_of(x)?;
    }
    let samples = cfg.int("samples")? as usize;
    let ps = cfg.list("p")?;
    let allowance = cfg.float("allowance")?;
    let sweeps = cfg.int("sweeps")? as usize;
    let mut scfg = if cfg.flag("record_full")? { SolverConfig::full() } else { SolverConfig::points(xs.clone()) };
    scfg.picard_sweeps = (sweeps > 0).then_some(sweeps);

    let ens = run_solver(&grid, &params, samples, &scfg)?;
    let steps = grid.steps()?;
    let ts: Vec<f64> =
        moment_steps(steps, cfg.int("moment_stride")? as usize).into_iter().map(|k| grid.t(k)).collect();
    let mut table = MomentTable { rows: Vec::new(), warnings: Vec::new() };
    for &p in &ps {
        let part = estimate_moments(&ens, p, &xs, &ts)?;
        table.rows.extend(part.rows);
        for w in part.warnings {
            if !table.warnings.contains(&w) {
                table.warnings.push(w);
            }
        }
    }
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }
    out.emit("moments.csv", moments_csv(&table).as_bytes())?;

    let mut brackets = Vec::new();
    if sweeps == 0 && params.require_standard().is_ok() {
        let series = second_moment_series(&params, grid.horizon)?;
        for r in table.rows.iter().filter(|r| r.t == ts[ts.len() - 1]) {
            let (lower, upper) = if r.p == 2.0 {
                (Some(series.lower_sum), series.upper_sum + series.tail_bound)
            } else if r.p > 2.0 {
                (None, p_moment_upper(&params, grid.horizon, r.p)?)
            } else {
                continue;
            };
            let lo_ok = lower.is_none_or(|lo| r.estimate >= lo * (1.0 - allowance) - 3.0 * r.se);
            let hi_ok = r.estimate <= upper * (1.0 + allowance) + 3.0 * r.se;
            brackets.push(BracketCheck {
                x: r.x,
                p: r.p,
                t: r.t,
                estimate: r.estimate,
                se: r.se,
                lower,
                upper,
                allowance,
                pass: lo_ok && hi_ok,
            });
        }
    }

    let mut lyapunov = Vec::new();
    if let Some(w) = cfg.opt_list("window")? {
        if w.len() != 2 || !(w[1] > w[0]) {
            return Err(CliError::Config("window must be 'start,end' with start < end".into()));
        }
        for &p in &ps {
            for &x in &xs {
                let fit = fit_lyapunov(&table, p, x, (w[0], w[1])).and_then(|f| {
                    if params.require_standard().is_ok() && p >= 2.0 {
                        f.with_bracket(&params, allowance)
                    } else {
                        Ok(f)
                    }
                });
                lyapunov.push(match fit {
                    Ok(f) => LyapunovRow { p, x, fit: Some(f), refused: None },
                    Err(e) => {
                        eprintln!("warning: no growth-rate fit for p = {p}, x = {x}: {e}");
                        LyapunovRow { p, x, fit: None, refused: Some(e.to_string()) }
                    }
                });
            }
        }
    }

    if cfg.flag("dump")? {
        let mut bytes = Vec::new();
        write_field_dump(&ens, &mut bytes)?;
        out.emit("field.bin", &bytes)?;
    }
    let scheme = ens.scheme.clone();
    let recorded = match scfg.recording {
        Recording::Full => "full",
        Recording::Points(_) => "points",
    };
    let mut warnings = table.warnings.clone();
    if recorded == "full" && !cfg.flag("dump")? {
        warnings.push("full recording without dump: only the observation points are summarised".into());
    }
    out.emit_json(
        "simulate_summary.json",
        &SimulateReport { params, grid, scheme, samples, warnings, brackets, lyapunov },
    )?;
    Ok(())
}
