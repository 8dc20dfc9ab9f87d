//! Binary restart files.
//!
//! Layout, all integers `u64` and all reals `f64`, little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `GEDYNRS1` |
//! | 3 × 8 | control points per axis |
//! | 8 | step index |
//! | 8 | `Δt` |
//! | 8 | half-point time |
//! | n × 8 | `uⁿ⁻¹`, `n = 3 · control points` |
//! | n × 8 | `uⁿ` |

use std::io::Write;
use std::path::Path;

use crate::io::{atomic_write, IoError};
use crate::scalar::Scalar;
use crate::spline::FieldCoeffs;

use super::StatePair;

pub const RESTART_MAGIC: &[u8; 8] = b"GEDYNRS1";

pub fn write_restart<S: Scalar>(path: &Path, pair: &StatePair<S>) -> Result<(), IoError> {
    assert_eq!(pair.prev.dims(), pair.curr.dims());
    atomic_write(path, |w: &mut dyn Write| {
        w.write_all(RESTART_MAGIC)?;
        for d in pair.curr.dims() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        w.write_all(&(pair.step as u64).to_le_bytes())?;
        w.write_all(&pair.dt.to_f64_lossy().to_le_bytes())?;
        w.write_all(&pair.t_half.to_f64_lossy().to_le_bytes())?;
        for v in pair.prev.as_slice().iter().chain(pair.curr.as_slice()) {
            w.write_all(&v.to_f64_lossy().to_le_bytes())?;
        }
        Ok(())
    })
}

pub fn read_restart<S: Scalar>(path: &Path) -> Result<StatePair<S>, IoError> {
    let bytes = std::fs::read(path).map_err(|e| IoError::io(path, e))?;
    let bad = |msg: &str| IoError::format(path, msg);
    if bytes.len() < 56 || &bytes[..8] != RESTART_MAGIC {
        return Err(bad("not a restart file"));
    }
    let word = |k: usize| -> [u8; 8] { bytes[8 + 8 * k..16 + 8 * k].try_into().expect("8 bytes") };
    let dims: [usize; 3] = std::array::from_fn(|a| u64::from_le_bytes(word(a)) as usize);
    let step = u64::from_le_bytes(word(3)) as usize;
    let dt = S::lit(f64::from_le_bytes(word(4)));
    let t_half = S::lit(f64::from_le_bytes(word(5)));
    let n = dims
        .iter()
        .try_fold(3usize, |acc, d| acc.checked_mul(*d))
        .ok_or_else(|| bad("control point counts overflow"))?;
    let expected = 56 + 16 * n;
    if bytes.len() != expected {
        return Err(bad(&format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let values: Vec<S> = bytes[56..]
        .chunks_exact(8)
        .map(|c| S::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
        .collect();
    let field = |data: &[S]| FieldCoeffs::from_vec(dims, data.to_vec()).map_err(|e| bad(&e.to_string()));
    Ok(StatePair {
        prev: field(&values[..n])?,
        curr: field(&values[n..])?,
        dt,
        step,
        t_half,
    })
}
