use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ham_cli::manifest::RunManifest;

fn ham(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ham")).args(args).env_remove("HAM_THREADS").output().expect("spawn ham")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn out_dir(root: &Path, name: &str) -> String {
    root.join(name).display().to_string()
}

fn csv_rows(path: PathBuf) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn exit_code_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let d = |n: &str| out_dir(tmp.path(), n);
    let cases: Vec<(Vec<String>, i32)> = vec![
        (vec!["--out".into(), d("a"), "spectral".into(), "--alpha".into(), "0".into()], 0),
        (vec!["--out".into(), d("b"), "spectral".into(), "--alpha".into(), "1.5".into()], 2),
        (vec!["--out".into(), d("c"), "chaos".into(), "--lambda".into(), "0".into()], 2),
        (vec!["--out".into(), d("d"), "chaos".into(), "--H".into(), "0.2".into()], 2),
        (vec!["--out".into(), d("e"), "chaos".into(), "--eta".into(), "0".into()], 2),
        (vec!["--out".into(), d("f"), "chaos".into(), "--qmc-n".into(), "5".into()], 2),
        (vec!["--out".into(), d("g"), "chaos".into(), "--window".into(), "5,10".into()], 2),
        (
            vec!["--out".into(), d("h"), "simulate".into(), "--L".into(), "0.5".into(), "--T".into(), "1".into()],
            2,
        ),
        (vec!["--out".into(), d("i"), "simulate".into(), "--kernel".into(), "heat".into()], 2),
        (vec!["--out".into(), d("j"), "simulate".into(), "--dt".into(), "0.3".into()], 2),
        (vec!["--out".into(), d("k"), "simulate".into(), "--samples".into(), "many".into()], 2),
        (vec!["--out".into(), d("l"), "frobnicate".into()], 2),
        (vec!["--out".into(), d("m"), "report".into(), d("missing/manifest.json")], 4),
    ];
    for (args, want) in cases {
        let a: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = ham(&a);
        assert_eq!(code(&o), want, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn chaos_rejection_messages() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ham(&["--out", &out_dir(tmp.path(), "a"), "chaos", "--lambda", "0"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("lambda must be nonzero"));
    let o = ham(&["--out", &out_dir(tmp.path(), "b"), "chaos", "--H", "0.2"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("H <= 1/4"));
    let o = ham(&["--out", &out_dir(tmp.path(), "c"), "simulate", "--L", "0.5", "--T", "1", "--obs-x", "0"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("light cone"));
}

#[test]
fn spectral_alpha_zero_is_pi() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("s");
    let o = ham(&["--out", dir.to_str().unwrap(), "spectral", "--alpha", "0", "--kernel", "wave"]);
    assert_eq!(code(&o), 0);
    let rows = csv_rows(dir.join("c_alpha.csv"));
    assert_eq!(rows.len(), 1);
    let v: f64 = rows[0][2].parse().unwrap();
    assert!((v - std::f64::consts::PI).abs() < 1e-9);
    for r in csv_rows(dir.join("scaling.csv")) {
        assert!(r[5].parse::<f64>().unwrap() < 1e-6, "{r:?}");
    }
}

#[test]
fn spectral_probe_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    for (h, verdict) in [("0.2", "divergent"), ("0.3", "convergent")] {
        let dir = tmp.path().join(h);
        let o = ham(&["--out", dir.to_str().unwrap(), "spectral", "--alpha", "0", "--probe-H", h, "--cutoffs", "1e1,1e2,1e3"]);
        assert_eq!(code(&o), 0);
        let partial: Vec<f64> = csv_rows(dir.join("probe.csv")).iter().map(|r| r[2].parse().unwrap()).collect();
        assert!(partial.windows(2).all(|w| w[1] > w[0]));
        let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("spectral_summary.json")).unwrap()).unwrap();
        assert_eq!(s["probe"]["verdict"], verdict);
    }
}

#[test]
fn chaos_first_term_qmc_matches_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("c");
    let o = ham(&["--out", dir.to_str().unwrap(), "chaos", "--H", "0.4", "--lambda", "1", "--eta", "1", "--t", "1", "--qmc-n", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("chaos_summary.json")).unwrap()).unwrap();
    let exact = s["first_term"].as_f64().unwrap();
    let est = s["qmc"][0]["estimate"]["value"].as_f64().unwrap();
    let se = s["qmc"][0]["estimate"]["se"].as_f64().unwrap();
    assert!((est - exact).abs() <= 3.0 * se, "{est} ± {se} vs {exact}");
    assert!((exact - 0.2418196).abs() < 1e-6);
    let rows = csv_rows(dir.join("chaos_terms.csv"));
    assert_eq!(rows[0][2], rows[0][3]);
    assert!(!rows[1][4].is_empty() && rows[2][4].is_empty());
}

#[test]
fn simulate_trivial_field_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("s");
    let o = ham(&["--out", dir.to_str().unwrap(), "simulate", "--lambda", "0", "--samples", "10"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unreliable below 100"));
    for r in csv_rows(dir.join("moments.csv")) {
        assert_eq!(r[3].parse::<f64>().unwrap(), 1.0);
        assert_eq!(r[4].parse::<f64>().unwrap(), 0.0);
    }
    let m = RunManifest::load(&dir.join("manifest.json")).unwrap();
    assert_eq!(m.command, "simulate");
    assert_eq!(m.seed, 1);
    assert!(m.verify(&dir).is_empty());
    // Every file in the directory except the manifest is listed.
    let mut files: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "manifest.json")
        .collect();
    files.sort();
    let mut listed: Vec<String> = m.outputs.iter().map(|o| o.path.clone()).collect();
    listed.sort();
    assert_eq!(files, listed);
}

#[test]
fn dump_is_listed_and_readable() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("s");
    let o = ham(&["--out", dir.to_str().unwrap(), "simulate", "--samples", "3", "--dt", "2^-3", "--dx", "2^-3", "--dump"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let ens = ham_core::simulate::read_field_dump(fs::File::open(dir.join("field.bin")).unwrap()).unwrap();
    assert_eq!((ens.samples, ens.steps, ens.columns.as_slice()), (3, 8, &[0.0][..]));
    assert!(RunManifest::load(&dir.join("manifest.json")).unwrap().output("field.bin").is_some());
}

#[test]
fn config_file_flags_override_and_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# small run\nsamples = 50\nseed = 9\ndt = 2^-4\ndx = 2^-4\nobs_x = 0, 0.25\n").unwrap();
    let a = tmp.path().join("a");
    let o = ham(&["--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "simulate", "--samples", "40"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = RunManifest::load(&a.join("manifest.json")).unwrap();
    assert!(m.config.contains("samples = 40") && m.config.contains("seed = 9"));
    assert!(m.config.contains("L = 1.25"));

    let b = tmp.path().join("b");
    let o = ham(&["--out", b.to_str().unwrap(), "replay", a.join("manifest.json").to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    // The recorded snapshot is itself a valid config producing the same outputs.
    let c = tmp.path().join("c");
    let o = ham(&["--config", a.join("config.txt").to_str().unwrap(), "--out", c.to_str().unwrap(), "simulate"]);
    assert_eq!(code(&o), 0);
    let mc = RunManifest::load(&c.join("manifest.json")).unwrap();
    assert_eq!(mc.outputs, m.outputs);
}

#[test]
fn report_consistency_containment_and_tamper() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |n: &str| tmp.path().join(n);
    let sim = ["simulate", "--samples", "200", "--dt", "2^-5", "--dx", "2^-5", "--p", "2"];
    for n in ["s1", "s2"] {
        let dir = p(n);
        let mut args = vec!["--out", dir.to_str().unwrap()];
        args.extend(sim);
        assert_eq!(code(&ham(&args)), 0);
    }
    assert_eq!(code(&ham(&["--out", p("c").to_str().unwrap(), "chaos", "--p", "2"])), 0);
    let man = |n: &str| p(n).join("manifest.json").display().to_string();

    let o = ham(&["--out", p("r1").to_str().unwrap(), "report", &man("s1"), &man("s2")]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("consistency: PASS"));

    let o = ham(&["--out", p("r2").to_str().unwrap(), "report", &man("s1"), &man("c")]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("bracket") && text.contains("p=2"), "{text}");
    assert_eq!(code(&o), if text.contains("FAIL") { 3 } else { 0 });
    assert!(p("r2").join("report.json").exists());

    let csv = p("s2").join("moments.csv");
    let mut bytes = fs::read(&csv).unwrap();
    let last = bytes.len() - 2;
    bytes[last] ^= 1;
    fs::write(&csv, bytes).unwrap();
    let o = ham(&["--out", p("r3").to_str().unwrap(), "report", &man("s1"), &man("s2")]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("checksum mismatch"));
}

#[test]
fn replay_detects_divergence() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    assert_eq!(code(&ham(&["--out", a.to_str().unwrap(), "spectral", "--alpha", "0.25"])), 0);
    let mpath = a.join("manifest.json");
    let mut m = RunManifest::load(&mpath).unwrap();
    m.outputs[0].sha256 = "0".repeat(64);
    fs::write(&mpath, serde_json::to_string(&m).unwrap()).unwrap();
    let o = ham(&["--out", tmp.path().join("b").to_str().unwrap(), "replay", mpath.to_str().unwrap()]);
    assert_eq!(code(&o), 4);
}

#[test]
fn worker_count_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut sums = Vec::new();
    for threads in ["1", "3"] {
        let dir = tmp.path().join(threads);
        let o = Command::new(env!("CARGO_BIN_EXE_ham"))
            .args(["--out", dir.to_str().unwrap(), "simulate", "--samples", "64", "--dt", "2^-4", "--dx", "2^-4"])
            .env("HAM_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
        let m = RunManifest::load(&dir.join("manifest.json")).unwrap();
        assert_eq!(m.threads.to_string(), threads);
        sums.push(m.outputs);
    }
    assert_eq!(sums[0], sums[1]);
    let o = Command::new(env!("CARGO_BIN_EXE_ham")).args(["schema"]).env("HAM_THREADS", "zero").output().unwrap();
    assert_eq!(code(&o), 2);
}
