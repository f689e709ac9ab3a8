//! Pressure values on a uniform grid over the box `[-half_width, half_width]^n`.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::dd::Dd;
use crate::error::{Error, Result};

/// Magic bytes of the snapshot format.
pub const SNAPSHOT_MAGIC: &[u8; 8] = b"PMEGRID1";

#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub n: usize,
    pub half_width: f64,
    /// Nodes per axis; odd so that the origin is a node.
    pub res: usize,
    pub h: f64,
    pub t: f64,
    /// Row-major, last axis fastest.
    pub values: Vec<f64>,
    /// Low parts: the pressure is the double-double `values[i] + lo[i]`.
    pub lo: Vec<f64>,
    pub support_mask: Vec<bool>,
}

impl GridField {
    pub fn zeros(n: usize, half_width: f64, res: usize) -> Result<GridField> {
        if res % 2 == 0 || res < 5 {
            return Err(Error::Resolution(res));
        }
        if n == 0 || n > 4 {
            return Err(Error::InvalidParameter(format!("grid dimension {n} not in 1..=4")));
        }
        if !(half_width > 0.0) {
            return Err(Error::InvalidParameter(format!("half width {half_width} must be positive")));
        }
        let len = res.pow(n as u32);
        Ok(GridField {
            n,
            half_width,
            res,
            h: 2.0 * half_width / (res - 1) as f64,
            t: 0.0,
            values: vec![0.0; len],
            lo: vec![0.0; len],
            support_mask: vec![false; len],
        })
    }

    /// Samples `f` at every node; negative samples are an error.
    pub fn from_fn(
        n: usize,
        half_width: f64,
        res: usize,
        mut f: impl FnMut(&[f64]) -> Result<f64>,
    ) -> Result<GridField> {
        let mut g = GridField::zeros(n, half_width, res)?;
        let mut x = vec![0.0; n];
        for i in 0..g.values.len() {
            g.coords_into(i, &mut x);
            let v = f(&x)?;
            if v < 0.0 || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("initial value {v} at {x:?}")));
            }
            g.values[i] = v;
        }
        g.update_mask();
        Ok(g)
    }

    /// As [`GridField::from_fn`], with coordinates and values in double-double precision.
    pub fn from_fn_dd(
        n: usize,
        half_width: f64,
        res: usize,
        mut f: impl FnMut(&[Dd]) -> Result<Dd>,
    ) -> Result<GridField> {
        let mut g = GridField::zeros(n, half_width, res)?;
        let mut x = vec![Dd::ZERO; n];
        for i in 0..g.values.len() {
            g.coords_dd_into(i, &mut x);
            let v = f(&x)?;
            if v.hi < 0.0 || !v.hi.is_finite() {
                return Err(Error::InvalidParameter(format!("initial value {} at {:?}", v.hi, g.multi_index(i))));
            }
            g.values[i] = v.hi;
            g.lo[i] = v.lo;
        }
        g.update_mask();
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.res.pow((self.n - 1 - axis) as u32)
    }

    pub fn multi_index(&self, mut i: usize) -> Vec<usize> {
        let mut idx = vec![0; self.n];
        for k in (0..self.n).rev() {
            idx[k] = i % self.res;
            i /= self.res;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &k| acc * self.res + k)
    }

    pub fn coord(&self, k: usize) -> f64 {
        -self.half_width + k as f64 * self.h
    }

    pub fn coords_into(&self, i: usize, x: &mut [f64]) {
        let mut i = i;
        for k in (0..self.n).rev() {
            x[k] = self.coord(i % self.res);
            i /= self.res;
        }
    }

    /// Node coordinates `-half_width + k h` without rounding.
    pub fn coords_dd_into(&self, i: usize, x: &mut [Dd]) {
        let mut i = i;
        for k in (0..self.n).rev() {
            x[k] = Dd::from(-self.half_width) + Dd::from((i % self.res) as f64) * self.h;
            i /= self.res;
        }
    }

    pub fn value_dd(&self, i: usize) -> Dd {
        Dd { hi: self.values[i], lo: self.lo[i] }
    }

    pub fn origin_index(&self) -> usize {
        self.flat_index(&vec![self.res / 2; self.n])
    }

    pub fn update_mask(&mut self) {
        for (m, v) in self.support_mask.iter_mut().zip(&self.values) {
            *m = *v > 0.0;
        }
    }

    pub fn max_value(&self) -> f64 {
        self.values.par_iter().copied().reduce(|| 0.0, f64::max)
    }

    /// Largest one-sided difference quotient `|v(x + h e_k) - v(x)| / h`.
    pub fn max_gradient(&self) -> f64 {
        (0..self.n)
            .map(|axis| {
                let s = self.stride(axis);
                let res = self.res;
                self.values
                    .par_iter()
                    .enumerate()
                    .filter(|(i, _)| (i / s) % res + 1 < res)
                    .map(|(i, &v)| (self.values[i + s] - v).abs())
                    .reduce(|| 0.0, f64::max)
            })
            .fold(0.0, f64::max)
            / self.h
    }

    /// Distance in nodes from the support to the box boundary (`res / 2` when empty).
    pub fn support_margin(&self) -> usize {
        let mut margin = self.res / 2;
        for (i, &on) in self.support_mask.iter().enumerate() {
            if on {
                for k in self.multi_index(i) {
                    margin = margin.min(k.min(self.res - 1 - k));
                }
            }
        }
        margin
    }

    /// `h^n Σ ((m-1) v / m)^(1/(m-1))`, the discrete mass of the density.
    pub fn mass_proxy(&self, m: f64) -> f64 {
        let cell = self.h.powi(self.n as i32);
        self.values.iter().map(|&v| ((m - 1.0) * v / m).powf(1.0 / (m - 1.0))).sum::<f64>() * cell
    }

    /// Snapshot: magic, `n` and `res` as little-endian u32, `t` as f64, then
    /// the values rounded to f64.
    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(24 + 8 * self.values.len());
        buf.extend_from_slice(SNAPSHOT_MAGIC);
        buf.extend_from_slice(&(self.n as u32).to_le_bytes());
        buf.extend_from_slice(&(self.res as u32).to_le_bytes());
        buf.extend_from_slice(&self.t.to_le_bytes());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::File::create(path)?.write_all(&buf)?;
        Ok(())
    }

    /// Reads a snapshot; the box half width is not stored and must be supplied.
    pub fn read_snapshot(path: &Path, half_width: f64) -> Result<GridField> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        let bad = |msg: &str| Error::Parse { line: 0, msg: format!("{}: {msg}", path.display()) };
        if buf.len() < 24 || &buf[..8] != SNAPSHOT_MAGIC {
            return Err(bad("not a grid snapshot"));
        }
        let n = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
        let res = u32::from_le_bytes(buf[12..16].try_into().unwrap()) as usize;
        let t = f64::from_le_bytes(buf[16..24].try_into().unwrap());
        let mut g = GridField::zeros(n, half_width, res)?;
        if buf.len() != 24 + 8 * g.len() {
            return Err(bad("payload length does not match the header"));
        }
        for (v, chunk) in g.values.iter_mut().zip(buf[24..].chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        g.t = t;
        g.update_mask();
        Ok(g)
    }
}
