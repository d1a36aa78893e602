//! Flat `key = value` run configuration.
//!
//! Every key has a fixed type; `#` starts a comment; blank lines are ignored.
//! Numbers accept `2^-8`-style powers besides ordinary decimal and exponent
//! notation. Lists are comma-separated. Flags given on the command line
//! override values read from a file, and the resolved configuration (defaults
//! filled in) is what a run records in its manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ham_core::Kernel;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ty {
    Float,
    Int,
    FloatList,
    Kernel,
    Bool,
}

impl Ty {
    fn name(self) -> &'static str {
        match self {
            Ty::Float => "float",
            Ty::Int => "integer",
            Ty::FloatList => "list of floats",
            Ty::Kernel => "wave|heat",
            Ty::Bool => "true|false",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Float(f64),
    Int(u64),
    FloatList(Vec<f64>),
    Kernel(Kernel),
    Bool(bool),
}

pub struct KeySpec {
    pub key: &'static str,
    pub ty: Ty,
    /// Default as config text; `None` means unset unless given.
    pub default: Option<&'static str>,
    pub unit: &'static str,
    pub doc: &'static str,
}

/// The complete schema, in serialisation order.
pub const SCHEMA: &[KeySpec] = &[
    KeySpec { key: "seed", ty: Ty::Int, default: Some("1"), unit: "-", doc: "master seed of every random stream" },
    KeySpec { key: "H", ty: Ty::Float, default: Some("0.4"), unit: "-", doc: "Hurst index of the spatial noise" },
    KeySpec { key: "lambda", ty: Ty::Float, default: Some("1"), unit: "-", doc: "coupling constant" },
    KeySpec { key: "eta", ty: Ty::Float, default: Some("1"), unit: "-", doc: "constant initial value" },
    KeySpec { key: "kernel", ty: Ty::Kernel, default: Some("wave"), unit: "-", doc: "fundamental solution" },
    KeySpec { key: "t", ty: Ty::Float, default: Some("1"), unit: "time", doc: "horizon T" },
    KeySpec {
        key: "alpha",
        ty: Ty::FloatList,
        default: Some("-0.5,0,0.2,0.5"),
        unit: "-",
        doc: "spectral: exponents of the C_alpha table",
    },
    KeySpec {
        key: "scaling_t",
        ty: Ty::FloatList,
        default: Some("0.5,1,2,5"),
        unit: "time",
        doc: "spectral: times of the scaling-law check",
    },
    KeySpec {
        key: "probe_H",
        ty: Ty::Float,
        default: None,
        unit: "-",
        doc: "spectral: Hurst index of the divergence probe (unset: no probe)",
    },
    KeySpec {
        key: "cutoffs",
        ty: Ty::FloatList,
        default: Some("10,100,1000"),
        unit: "frequency",
        doc: "spectral: probe cutoffs",
    },
    KeySpec {
        key: "qmc_n",
        ty: Ty::Int,
        default: Some("0"),
        unit: "-",
        doc: "chaos: QMC estimates for orders 1..=qmc_n (at most 4)",
    },
    KeySpec {
        key: "qmc_points",
        ty: Ty::Int,
        default: Some("16384"),
        unit: "-",
        doc: "chaos: initial lattice points per randomisation",
    },
    KeySpec {
        key: "qmc_randomizations",
        ty: Ty::Int,
        default: Some("16"),
        unit: "-",
        doc: "chaos: random shifts (at least 16)",
    },
    KeySpec {
        key: "series_tol",
        ty: Ty::Float,
        default: Some("1e-6"),
        unit: "-",
        doc: "chaos: relative truncation tolerance of the series",
    },
    KeySpec {
        key: "p",
        ty: Ty::FloatList,
        default: Some("2,4"),
        unit: "-",
        doc: "moment orders (chaos bounds need p >= 2, simulation p >= 1)",
    },
    KeySpec {
        key: "window",
        ty: Ty::FloatList,
        default: None,
        unit: "time",
        doc: "start,end of the growth-rate window (unset: no growth rates)",
    },
    KeySpec {
        key: "window_points",
        ty: Ty::Int,
        default: Some("16"),
        unit: "-",
        doc: "chaos: grid points in the growth-rate window",
    },
    KeySpec { key: "dt", ty: Ty::Float, default: Some("2^-6"), unit: "time", doc: "simulate: time step" },
    KeySpec { key: "dx", ty: Ty::Float, default: Some("2^-6"), unit: "length", doc: "simulate: cell width" },
    KeySpec {
        key: "L",
        ty: Ty::Float,
        default: None,
        unit: "length",
        doc: "simulate: domain half-width (unset: smallest on-grid value >= max|x| + T)",
    },
    KeySpec {
        key: "obs_x",
        ty: Ty::FloatList,
        default: Some("0"),
        unit: "length",
        doc: "simulate: observation points",
    },
    KeySpec { key: "samples", ty: Ty::Int, default: Some("1000"), unit: "-", doc: "simulate: Monte Carlo samples" },
    KeySpec {
        key: "moment_stride",
        ty: Ty::Int,
        default: None,
        unit: "steps",
        doc: "simulate: steps between moment-table rows (unset: at most 64 rows)",
    },
    KeySpec {
        key: "sweeps",
        ty: Ty::Int,
        default: Some("0"),
        unit: "-",
        doc: "simulate: Picard sweeps (0: causal stepping)",
    },
    KeySpec {
        key: "record_full",
        ty: Ty::Bool,
        default: Some("false"),
        unit: "-",
        doc: "simulate: record every cell rather than the observation points",
    },
    KeySpec { key: "dump", ty: Ty::Bool, default: Some("false"), unit: "-", doc: "simulate: write field.bin" },
    KeySpec {
        key: "allowance",
        ty: Ty::Float,
        default: None,
        unit: "-",
        doc: "relative discretisation allowance in bracket comparisons (unset: 0.05, doubled for H < 0.35)",
    },
];

pub fn spec(key: &str) -> Option<&'static KeySpec> {
    SCHEMA.iter().find(|s| s.key == key)
}

/// Parses `a^b` powers as well as ordinary floats.
pub fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some((b, e)) = s.split_once('^') {
        let (b, e) = (b.trim().parse::<f64>().ok()?, e.trim().parse::<f64>().ok()?);
        let v = b.powf(e);
        return v.is_finite().then_some(v);
    }
    let v = s.parse::<f64>().ok()?;
    v.is_finite().then_some(v)
}

/// Shortest round-trip rendering.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn parse_value(ty: Ty, key: &str, raw: &str) -> CliResult<Value> {
    let bad = || CliError::Config(format!("{key}: cannot parse '{raw}' as {}", ty.name()));
    let raw = raw.trim();
    Ok(match ty {
        Ty::Float => Value::Float(parse_number(raw).ok_or_else(bad)?),
        Ty::Int => Value::Int(raw.parse::<u64>().map_err(|_| bad())?),
        Ty::FloatList => {
            let items = raw
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(parse_number)
                .collect::<Option<Vec<_>>>()
                .ok_or_else(bad)?;
            Value::FloatList(items)
        }
        Ty::Kernel => Value::Kernel(raw.parse().map_err(|_| bad())?),
        Ty::Bool => Value::Bool(match raw {
            "true" | "yes" | "1" => true,
            "false" | "no" | "0" => false,
            _ => return Err(bad()),
        }),
    })
}

fn format_value(v: &Value) -> String {
    match v {
        Value::Float(x) => format_number(*x),
        Value::Int(n) => n.to_string(),
        Value::FloatList(xs) => xs.iter().map(|x| format_number(*x)).collect::<Vec<_>>().join(","),
        Value::Kernel(k) => k.to_string(),
        Value::Bool(b) => b.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    values: BTreeMap<&'static str, Value>,
}

impl RunConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = RunConfig::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(k.trim(), v)?;
        }
        Ok(cfg)
    }

    /// One `key = value` line per set key, in schema order.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        for spec in SCHEMA {
            if let Some(v) = self.values.get(spec.key) {
                let _ = writeln!(s, "{} = {}", spec.key, format_value(v));
            }
        }
        s
    }

    pub fn set(&mut self, key: &str, raw: &str) -> CliResult<()> {
        let spec = spec(key).ok_or_else(|| CliError::Config(format!("unknown configuration key '{key}'")))?;
        let v = parse_value(spec.ty, spec.key, raw)?;
        self.values.insert(spec.key, v);
        Ok(())
    }

    pub fn set_value(&mut self, key: &str, v: Value) -> CliResult<()> {
        let spec = spec(key).ok_or_else(|| CliError::Config(format!("unknown configuration key '{key}'")))?;
        self.values.insert(spec.key, v);
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    /// Values of `other` take precedence.
    pub fn merge(&mut self, other: &RunConfig) {
        for (k, v) in &other.values {
            self.values.insert(k, v.clone());
        }
    }

    /// Fills every unset key that has a default.
    pub fn with_defaults(mut self) -> Self {
        for spec in SCHEMA {
            if let Some(d) = spec.default {
                if !self.values.contains_key(spec.key) {
                    let v = parse_value(spec.ty, spec.key, d).expect("schema defaults parse");
                    self.values.insert(spec.key, v);
                }
            }
        }
        self
    }

    fn get(&self, key: &str) -> CliResult<Option<&Value>> {
        if spec(key).is_none() {
            return Err(CliError::Config(format!("unknown configuration key '{key}'")));
        }
        Ok(self.values.get(key))
    }

    fn required(&self, key: &str) -> CliResult<&Value> {
        self.get(key)?.ok_or_else(|| CliError::Config(format!("missing configuration key '{key}'")))
    }

    pub fn float(&self, key: &str) -> CliResult<f64> {
        self.opt_float(key)?.ok_or_else(|| CliError::Config(format!("missing configuration key '{key}'")))
    }

    pub fn opt_float(&self, key: &str) -> CliResult<Option<f64>> {
        match self.get(key)? {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(_) => Err(CliError::Config(format!("{key} is not a float"))),
        }
    }

    pub fn int(&self, key: &str) -> CliResult<u64> {
        self.opt_int(key)?.ok_or_else(|| CliError::Config(format!("missing configuration key '{key}'")))
    }

    pub fn opt_int(&self, key: &str) -> CliResult<Option<u64>> {
        match self.get(key)? {
            None => Ok(None),
            Some(Value::Int(n)) => Ok(Some(*n)),
            Some(_) => Err(CliError::Config(format!("{key} is not an integer"))),
        }
    }

    pub fn list(&self, key: &str) -> CliResult<Vec<f64>> {
        self.opt_list(key)?.ok_or_else(|| CliError::Config(format!("missing configuration key '{key}'")))
    }

    pub fn opt_list(&self, key: &str) -> CliResult<Option<Vec<f64>>> {
        match self.get(key)? {
            None => Ok(None),
            Some(Value::FloatList(xs)) => Ok(Some(xs.clone())),
            Some(_) => Err(CliError::Config(format!("{key} is not a list"))),
        }
    }

    pub fn kernel(&self, key: &str) -> CliResult<Kernel> {
        match self.required(key)? {
            Value::Kernel(k) => Ok(*k),
            _ => Err(CliError::Config(format!("{key} is not a kernel"))),
        }
    }

    pub fn flag(&self, key: &str) -> CliResult<bool> {
        match self.required(key)? {
            Value::Bool(b) => Ok(*b),
            _ => Err(CliError::Config(format!("{key} is not a boolean"))),
        }
    }
}

/// Human-readable schema table.
pub fn schema_doc() -> String {
    let mut s = String::from("# key = default  # type, unit: description\n");
    for spec in SCHEMA {
        let _ = writeln!(
            s,
            "{} = {}  # {}, {}: {}",
            spec.key,
            spec.default.unwrap_or(""),
            spec.ty.name(),
            spec.unit,
            spec.doc
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powers_and_lists() {
        assert_eq!(parse_number("2^-8"), Some(1.0 / 256.0));
        assert_eq!(parse_number(" 1e3 "), Some(1000.0));
        assert_eq!(parse_number("x"), None);
        let c = RunConfig::parse("alpha = -0.5, 0 ,2^-1 # comment\n\nkernel=heat\n").unwrap();
        assert_eq!(c.list("alpha").unwrap(), vec![-0.5, 0.0, 0.5]);
        assert_eq!(c.kernel("kernel").unwrap(), Kernel::Heat);
    }

    #[test]
    fn rejects_unknown_and_mistyped() {
        assert!(RunConfig::parse("bogus = 1").is_err());
        assert!(RunConfig::parse("samples = 1.5").is_err());
        assert!(RunConfig::parse("H 0.4").is_err());
    }

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::new().with_defaults();
        assert_eq!(RunConfig::parse(&c.serialize()).unwrap(), c);
        assert_eq!(c.float("dt").unwrap(), 1.0 / 64.0);
        assert!(!c.contains("L"));
    }

    #[test]
    fn schema_defaults_all_parse() {
        for spec in SCHEMA {
            if let Some(d) = spec.default {
                parse_value(spec.ty, spec.key, d).unwrap();
            }
        }
        assert!(schema_doc().lines().count() == SCHEMA.len() + 1);
    }
}
