use ham_core::output::fmt_f64;
use ham_core::spectral::{
    check_alpha, compute_c_alpha, divergence_probe, energy_exponent, green_energy_quadrature, probe_growth_exponent,
    ProbePoint, QuadConfig,
};
use ham_core::{Kernel, SpectralConstant};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::Emitter;

/// Largest accepted relative gap between quadrature and `C_α t^{e(α)}`.
pub const SCALING_TOL: f64 = 1e-6;

#[derive(Debug, Serialize)]
struct ScalingRow {
    alpha: f64,
    t: f64,
    quadrature: f64,
    closed_form: f64,
    rel_error: f64,
}

#[derive(Debug, Serialize)]
struct ProbeSummary {
    hurst: f64,
    points: Vec<ProbePoint>,
    growth_exponent: Option<f64>,
    /// `1 - 4H`: positive when the integrals diverge.
    expected_exponent: f64,
    verdict: &'static str,
}

#[derive(Debug, Serialize)]
struct SpectralSummary {
    kernel: Kernel,
    c_alpha: Vec<SpectralConstant>,
    scaling_max_rel_error: f64,
    probe: Option<ProbeSummary>,
}

pub fn run(cfg: &RunConfig, out: &mut Emitter) -> CliResult<()> {
    let kernel = cfg.kernel("kernel")?;
    let alphas = cfg.list("alpha")?;
    let times = cfg.list("scaling_t")?;
    if alphas.is_empty() {
        return Err(CliError::Config("alpha list is empty".into()));
    }
    for &a in &alphas {
        check_alpha(a, kernel)?;
    }
    if times.iter().any(|t| !(*t > 0.0)) {
        return Err(CliError::Config("scaling times must be positive".into()));
    }
    let qc = QuadConfig::default();

    let mut table = String::from("kernel,alpha,value,quad_error\n");
    let mut constants = Vec::new();
    for &a in &alphas {
        let c = compute_c_alpha(a, kernel, &qc)?;
        table.push_str(&format!("{},{},{},{}\n", kernel, fmt_f64(a), fmt_f64(c.value), fmt_f64(c.quad_error)));
        constants.push(c);
    }
    out.emit("c_alpha.csv", table.as_bytes())?;

    let mut scaling = String::from("kernel,alpha,t,quadrature,closed_form,rel_error\n");
    let mut rows = Vec::new();
    for c in &constants {
        for &t in &times {
            let q = green_energy_quadrature(t, c.alpha, kernel, &qc)?;
            let closed = c.value * t.powf(energy_exponent(c.alpha, kernel));
            let rel = ((q.value - closed) / closed).abs();
            scaling.push_str(&format!(
                "{},{},{},{},{},{}\n",
                kernel,
                fmt_f64(c.alpha),
                fmt_f64(t),
                fmt_f64(q.value),
                fmt_f64(closed),
                fmt_f64(rel)
            ));
            rows.push(ScalingRow { alpha: c.alpha, t, quadrature: q.value, closed_form: closed, rel_error: rel });
        }
    }
    out.emit("scaling.csv", scaling.as_bytes())?;
    let max_rel = rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);

    let probe = match cfg.opt_float("probe_H")? {
        None => None,
        Some(h) => {
            let cutoffs = cfg.list("cutoffs")?;
            let points = divergence_probe(h, &cutoffs)?;
            let mut csv = String::from("H,cutoff,partial,quad_error,increment\n");
            let mut prev = 0.0;
            for p in &points {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    fmt_f64(h),
                    fmt_f64(p.cutoff),
                    fmt_f64(p.partial),
                    fmt_f64(p.quad_error),
                    fmt_f64(p.partial - prev)
                ));
                prev = p.partial;
            }
            out.emit("probe.csv", csv.as_bytes())?;
            let growth = if points.len() >= 3 { Some(probe_growth_exponent(&points)?) } else { None };
            let verdict = match growth {
                Some(g) if g > 0.0 => "divergent",
                Some(_) => "convergent",
                None => "undetermined",
            };
            Some(ProbeSummary { hurst: h, points, growth_exponent: growth, expected_exponent: 1.0 - 4.0 * h, verdict })
        }
    };

    out.emit_json(
        "spectral_summary.json",
        &SpectralSummary { kernel, c_alpha: constants, scaling_max_rel_error: max_rel, probe },
    )?;
    if max_rel > SCALING_TOL {
        return Err(CliError::Invariant(format!(
            "scaling law violated: max relative gap {max_rel:e} exceeds {SCALING_TOL:e}"
        )));
    }
    Ok(())
}
