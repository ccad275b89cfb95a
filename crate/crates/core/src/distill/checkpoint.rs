//! Binary model checkpoint. All integers are little-endian `u32` unless
//! noted, all reals little-endian `f64`:
//!
//! ```text
//! magic      8 bytes  "SGDENOI1"
//! layers     L, then L layer widths (input first)
//! time_dim
//! basis      n_b, radius, seed (u64), then n_b points as x y z
//! schedule   T, then T betas
//! norm       grasp_dim means, then grasp_dim standard deviations
//! weights    per layer: out x in weights row-major, then out biases
//! ```
//!
//! `grasp_dim` is the last layer width.

use std::path::Path;

use nalgebra::Point3;

use super::bps::BasisPointSet;
use super::model::Denoiser;
use super::net::Mlp;
use super::schedule::NoiseSchedule;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SGDENOI1";

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn to_bytes(model: &Denoiser) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    let sizes = model.net.sizes();
    put_u32(&mut out, sizes.len());
    for &s in sizes {
        put_u32(&mut out, s);
    }
    put_u32(&mut out, model.time_dim);
    put_u32(&mut out, model.basis.points.len());
    put_f64s(&mut out, &[model.basis.radius]);
    out.extend_from_slice(&model.basis.seed.to_le_bytes());
    for p in &model.basis.points {
        put_f64s(&mut out, &[p.x, p.y, p.z]);
    }
    put_u32(&mut out, model.schedule.steps());
    put_f64s(&mut out, model.schedule.betas());
    put_f64s(&mut out, &model.mean);
    put_f64s(&mut out, &model.std);
    put_f64s(&mut out, &model.net.params());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.at < n {
            return Err(Error::parse(
                self.path,
                0,
                format!("truncated checkpoint at byte {}", self.at),
            ));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let b = self.take(n.checked_mul(8).ok_or_else(|| self.bad("size overflow"))?)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn bad(&self, message: &str) -> Error {
        Error::parse(self.path, 0, message.to_string())
    }
}

pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Denoiser> {
    let mut r = Reader { bytes, at: 0, path };
    if r.take(8)? != MAGIC {
        return Err(r.bad("not a denoiser checkpoint (bad magic)"));
    }
    let layers = r.u32()?;
    if !(2..=64).contains(&layers) {
        return Err(r.bad("implausible layer count"));
    }
    let sizes = (0..layers).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let time_dim = r.u32()?;
    let n_b = r.u32()?;
    let radius = r.f64s(1)?[0];
    let seed = r.u64()?;
    let coords = r.f64s(n_b.checked_mul(3).ok_or_else(|| r.bad("size overflow"))?)?;
    let points = coords
        .chunks_exact(3)
        .map(|c| Point3::new(c[0], c[1], c[2]))
        .collect();
    let steps = r.u32()?;
    let schedule = NoiseSchedule::new(r.f64s(steps)?).map_err(|e| r.bad(&e.to_string()))?;
    let dim = *sizes.last().expect("checked above");
    if sizes[0] != dim + n_b + time_dim {
        return Err(r.bad("input width does not match grasp, basis and time dimensions"));
    }
    let mean = r.f64s(dim)?;
    let std = r.f64s(dim)?;
    let mut net = Mlp::new(&sizes, 0).map_err(|e| r.bad(&e.to_string()))?;
    let params = r.f64s(net.param_count())?;
    net.set_params(&params).map_err(|e| r.bad(&e.to_string()))?;
    if r.at != bytes.len() {
        return Err(r.bad("trailing bytes after weights"));
    }
    Ok(Denoiser {
        net,
        time_dim,
        basis: BasisPointSet {
            points,
            radius,
            seed,
        },
        schedule,
        mean,
        std,
    })
}

pub fn write_checkpoint(path: &Path, model: &Denoiser) -> Result<()> {
    std::fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Denoiser> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, path)
}
