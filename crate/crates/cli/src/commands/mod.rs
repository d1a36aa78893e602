pub mod chaos;
pub mod report;
pub mod simulate;
pub mod spectral;

use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use ham_core::spectral::CAlphaCache;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::{write_manifest, Emitter, RunManifest};

pub const CONFIG_NAME: &str = "config.txt";

/// Subcommands that produce a manifest.
pub const RUN_COMMANDS: &[&str] = &["spectral", "chaos", "simulate"];

/// File config, overridden by flags, with defaults and derived values filled.
pub fn resolve_config(command: &str, file: Option<&Path>, flags: &RunConfig) -> CliResult<RunConfig> {
    let mut cfg = match file {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::new(),
    };
    cfg.merge(flags);
    let mut cfg = cfg.with_defaults();
    if command == "simulate" {
        simulate::resolve(&mut cfg)?;
    }
    Ok(cfg)
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Runs one subcommand on a resolved configuration and writes its manifest.
///
/// The manifest is written on success and on invariant violations, whose
/// outputs are kept for inspection.
pub fn execute(command: &str, cfg: &RunConfig, out: &Path, cache_file: Option<&Path>) -> CliResult<RunManifest> {
    let started = now();
    let cache = CAlphaCache::global();
    if let Some(p) = cache_file {
        cache.attach_file(p).map_err(|e| CliError::Integrity(format!("C_alpha cache {}: {e}", p.display())))?;
    }
    let mut em = Emitter::new(out)?;
    let res = match command {
        "spectral" => spectral::run(cfg, &mut em),
        "chaos" => chaos::run(cfg, &mut em),
        "simulate" => simulate::run(cfg, &mut em),
        other => Err(CliError::Config(format!("'{other}' does not produce a manifest"))),
    };
    if let Err(e) = &res {
        if !matches!(e, CliError::Invariant(_)) {
            return Err(res.unwrap_err());
        }
    }
    let snapshot = cfg.serialize();
    em.emit(CONFIG_NAME, snapshot.as_bytes())?;
    let manifest = RunManifest {
        tool: "ham".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config: snapshot,
        seed: cfg.int("seed")?,
        started,
        finished: now(),
        threads: rayon::current_num_threads(),
        outputs: em.into_outputs(),
        cache: cache.stats(),
    };
    write_manifest(out, &manifest)?;
    res.map(|_| manifest)
}

/// Re-runs a manifest's command and configuration into `out` and compares
/// every checksum.
pub fn replay(manifest_path: &Path, out: &Path) -> CliResult<RunManifest> {
    let old = RunManifest::load(manifest_path)?;
    if !RUN_COMMANDS.contains(&old.command.as_str()) {
        return Err(CliError::Integrity(format!("unknown command '{}' in manifest", old.command)));
    }
    let cfg = RunConfig::parse(&old.config)?;
    if cfg.int("seed")? != old.seed {
        return Err(CliError::Integrity("manifest seed disagrees with its config".into()));
    }
    let new = execute(&old.command, &cfg, out, None)?;
    let mut bad = Vec::new();
    for o in &old.outputs {
        match new.output(&o.path) {
            Some(n) if n.sha256 == o.sha256 => {}
            Some(_) => bad.push(format!("{}: checksum differs", o.path)),
            None => bad.push(format!("{}: not reproduced", o.path)),
        }
    }
    if new.outputs.len() != old.outputs.len() {
        bad.push("different set of outputs".into());
    }
    if !bad.is_empty() {
        return Err(CliError::Integrity(format!("replay mismatch: {}", bad.join("; "))));
    }
    Ok(new)
}

pub fn report(paths: &[PathBuf], out: &Path) -> CliResult<()> {
    let mut em = Emitter::new(out)?;
    let checks = report::run(paths, &mut em)?;
    if checks.is_empty() {
        println!("no comparable runs");
    }
    for c in &checks {
        println!("{}: {} ({})", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        return Err(CliError::Invariant(format!("{failed} comparison(s) failed")));
    }
    Ok(())
}
