//! Raw field dump.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic  [u8; 8] = "HAMFIELD"
//! version u32
//! dt, T, dx, L           f64 ×4
//! steps K, cells M       u64 ×2
//! H, λ, η                f64 ×3
//! seed, samples, columns u64 ×3
//! column positions       f64 × columns
//! u[s][k][c]             f64 × samples·(K+1)·columns
//! ```

use std::io::{Read, Write};

use super::{FieldEnsemble, GridSpec};
use crate::error::{HamError, Result};
use crate::spectral::ModelParams;

pub const DUMP_MAGIC: &[u8; 8] = b"HAMFIELD";
pub const DUMP_VERSION: u32 = 1;

pub fn write_field_dump<W: Write>(ens: &FieldEnsemble, mut w: W) -> Result<()> {
    let g = &ens.grid;
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&DUMP_VERSION.to_le_bytes())?;
    for v in [g.dt, g.horizon, g.dx, g.half_width] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in [ens.steps as u64, g.cells()? as u64] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in [ens.params.hurst, ens.params.lambda, ens.params.eta] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in [g.seed, ens.samples as u64, ens.columns.len() as u64] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in ens.columns.iter().chain(&ens.values) {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    read_u64(r).map(f64::from_bits)
}

pub fn read_field_dump<R: Read>(mut r: R) -> Result<FieldEnsemble> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(HamError::Io("not a field dump (bad magic)".into()));
    }
    let mut vb = [0u8; 4];
    r.read_exact(&mut vb)?;
    let version = u32::from_le_bytes(vb);
    if version != DUMP_VERSION {
        return Err(HamError::Io(format!("unsupported dump version {version}")));
    }
    let (dt, horizon, dx, half_width) = (read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?);
    let steps = read_u64(&mut r)? as usize;
    let _cells = read_u64(&mut r)?;
    let (hurst, lambda, eta) = (read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?);
    let seed = read_u64(&mut r)?;
    let samples = read_u64(&mut r)? as usize;
    let ncol = read_u64(&mut r)? as usize;
    let columns = (0..ncol).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    let n = samples
        .checked_mul(steps + 1)
        .and_then(|v| v.checked_mul(ncol))
        .ok_or_else(|| HamError::Io("dump dimensions overflow".into()))?;
    let values = (0..n).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    Ok(FieldEnsemble {
        grid: GridSpec { dt, horizon, dx, half_width, seed },
        params: ModelParams::new(hurst, lambda, eta),
        samples,
        scheme: "dump".into(),
        columns,
        steps,
        values,
    })
}
