use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::chaos::ChaosReport;
use super::simulate::SimulateReport;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::{Emitter, RunManifest};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
struct Report {
    manifests: Vec<String>,
    checks: Vec<Check>,
}

struct Loaded {
    path: PathBuf,
    dir: PathBuf,
    manifest: RunManifest,
    config: RunConfig,
}

fn load_json<T: serde::de::DeserializeOwned>(run: &Loaded, name: &str) -> CliResult<Option<T>> {
    if run.manifest.output(name).is_none() {
        return Ok(None);
    }
    let text = fs::read_to_string(run.dir.join(name))?;
    Ok(Some(serde_json::from_str(&text)?))
}

fn same_model(a: &RunConfig, b: &RunConfig) -> CliResult<bool> {
    for k in ["H", "lambda", "eta", "t"] {
        if a.float(k)? != b.float(k)? {
            return Ok(false);
        }
    }
    Ok(a.kernel("kernel")? == b.kernel("kernel")?)
}

/// Verifies every manifest, then compares runs pairwise.
///
/// Integrity failures abort with exit code 4 before any comparison. A failed
/// comparison is reported and turned into exit code 3 after the report is
/// written.
pub fn run(paths: &[PathBuf], out: &mut Emitter) -> CliResult<Vec<Check>> {
    if paths.is_empty() {
        return Err(CliError::Config("report needs at least one manifest".into()));
    }
    let mut runs = Vec::new();
    for p in paths {
        let manifest = RunManifest::load(p)?;
        let dir = p.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        let bad = manifest.verify(&dir);
        if !bad.is_empty() {
            return Err(CliError::Integrity(format!("{}: {}", p.display(), bad.join("; "))));
        }
        let config = RunConfig::parse(&manifest.config)
            .map_err(|e| CliError::Integrity(format!("{}: recorded config does not parse: {e}", p.display())))?;
        runs.push(Loaded { path: p.clone(), dir, manifest, config });
    }

    let mut checks = Vec::new();
    for (i, a) in runs.iter().enumerate() {
        for b in &runs[i + 1..] {
            let (ma, mb) = (&a.manifest, &b.manifest);
            if ma.command == mb.command && a.config == b.config {
                let same = ma.outputs.len() == mb.outputs.len()
                    && ma.outputs.iter().all(|o| mb.output(&o.path).is_some_and(|q| q.sha256 == o.sha256));
                checks.push(Check {
                    name: "consistency".into(),
                    pass: same,
                    detail: format!(
                        "{} vs {}: {}",
                        a.path.display(),
                        b.path.display(),
                        if same { "identical checksums" } else { "checksums differ" }
                    ),
                });
            }
        }
    }

    for sim in runs.iter().filter(|r| r.manifest.command == "simulate") {
        let Some(s): Option<SimulateReport> = load_json(sim, "simulate_summary.json")? else { continue };
        for ch in runs.iter().filter(|r| r.manifest.command == "chaos") {
            if !same_model(&sim.config, &ch.config)? {
                continue;
            }
            let Some(c): Option<ChaosReport> = load_json(ch, "chaos_summary.json")? else { continue };
            let allowance = sim.config.float("allowance")?;
            for b in &s.brackets {
                let (lower, upper) = if b.p == 2.0 {
                    (Some(c.lower_sum), c.upper_sum + c.tail_bound)
                } else if let Some(pm) = c.p_moments.iter().find(|m| m.p == b.p) {
                    (None, pm.upper)
                } else {
                    continue;
                };
                let lo_ok = lower.is_none_or(|lo| b.estimate >= lo * (1.0 - allowance) - 3.0 * b.se);
                let hi_ok = b.estimate <= upper * (1.0 + allowance) + 3.0 * b.se;
                checks.push(Check {
                    name: format!("bracket {} p={} x={} t={}", sim.dir.display(), b.p, b.x, b.t),
                    pass: lo_ok && hi_ok,
                    detail: format!(
                        "estimate {:.6} ± {:.6} vs [{}, {:.6}] widened by {} and 3 se",
                        b.estimate,
                        b.se,
                        lower.map(|l| format!("{l:.6}")).unwrap_or_else(|| "-".into()),
                        upper,
                        allowance
                    ),
                });
            }
            for row in &s.lyapunov {
                let Some(fit) = &row.fit else { continue };
                let Some(br) = c.lyapunov.iter().find(|l| l.p == row.p) else { continue };
                let lo = br.slope_lower * (1.0 - allowance);
                let hi = br.slope_upper * (1.0 + allowance);
                checks.push(Check {
                    name: format!("slope {} p={} x={}", sim.dir.display(), row.p, row.x),
                    pass: fit.ci.1 >= lo && fit.ci.0 <= hi,
                    detail: format!(
                        "fitted {:.6} (95% CI {:.6}..{:.6}) vs bracket [{:.6}, {:.6}]",
                        fit.slope, fit.ci.0, fit.ci.1, br.slope_lower, br.slope_upper
                    ),
                });
            }
        }
    }

    let report = Report { manifests: runs.iter().map(|r| r.path.display().to_string()).collect(), checks };
    out.emit_json("report.json", &report)?;
    Ok(report.checks)
}
