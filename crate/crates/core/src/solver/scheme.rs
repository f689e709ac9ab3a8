//! Explicit update for `v_t = (m-1) v Δv + |∇v|²`.

use rayon::prelude::*;

use super::grid::GridField;
use crate::dd::Dd;
use crate::error::{Error, Result};

/// Per-step diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats {
    /// Largest magnitude clamped to zero.
    pub clamp_norm: f64,
    pub max_v: f64,
    /// A value above `CONTACT_FLOOR * max v` sits next to the Dirichlet boundary.
    pub boundary_contact: bool,
}

/// Relative size below which a value next to the boundary is not counted as
/// contact. The upwind term seeds zero nodes ahead of the front with values
/// that shrink doubly exponentially with distance; they carry no mass.
pub const CONTACT_FLOOR: f64 = 1e-9;

/// Largest stable time step: the diffusion bound `h² / (4n (m-1) max v)`
/// combined with the upwind bound `h / (4n max |D^± v|)`.
pub fn admissible_dt(field: &GridField, m: f64) -> f64 {
    let n = field.n as f64;
    let h = field.h;
    let (vmax, gmax) = (field.max_value(), field.max_gradient());
    let diffusion = if vmax > 0.0 { h * h / (4.0 * n * (m - 1.0) * vmax) } else { f64::INFINITY };
    let upwind = if gmax > 0.0 { h / (4.0 * n * gmax) } else { f64::INFINITY };
    diffusion.min(upwind)
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// One explicit step; refuses `dt` above [`admissible_dt`].
pub fn step(field: &GridField, m: f64, dt: f64) -> Result<GridField> {
    let mut out = field.clone();
    step_into(field, &mut out, m, dt)?;
    Ok(out)
}

/// As [`step`], writing into `out` (same shape as `field`).
///
/// Differences are formed from the double-double values, so they keep full
/// relative precision even when `v` is large; the increment is added back in
/// double-double.
pub fn step_into(field: &GridField, out: &mut GridField, m: f64, dt: f64) -> Result<StepStats> {
    if !(m > 1.0) {
        return Err(Error::InvalidParameter(format!("m = {m} must exceed 1")));
    }
    let admissible = admissible_dt(field, m);
    if !(dt >= 0.0) || dt > admissible {
        return Err(Error::Stability { dt, admissible });
    }
    let n = field.n;
    let res = field.res;
    let h = field.h;
    let (hi, lo) = (&field.values, &field.lo);
    let diff = |a: usize, b: usize| (hi[a] - hi[b]) + (lo[a] - lo[b]);
    let strides: Vec<usize> = (0..n).map(|k| field.stride(k)).collect();
    let contact_level = CONTACT_FLOOR * field.max_value();
    let row_stats: Vec<StepStats> = out
        .values
        .par_chunks_mut(res)
        .zip(out.lo.par_chunks_mut(res))
        .enumerate()
        .map(|(row, (dst_hi, dst_lo))| {
            let mut lead = vec![0usize; n];
            let mut r = row;
            for k in (0..n - 1).rev() {
                lead[k] = r % res;
                r /= res;
            }
            let row_on_boundary = lead[..n - 1].iter().any(|&k| k == 0 || k == res - 1);
            let row_near_boundary = lead[..n - 1].iter().any(|&k| k == 1 || k == res - 2);
            let mut stats = StepStats::default();
            for j in 0..res {
                if row_on_boundary || j == 0 || j == res - 1 {
                    dst_hi[j] = 0.0;
                    dst_lo[j] = 0.0;
                    continue;
                }
                let i = row * res + j;
                let v = hi[i] + lo[i];
                let mut lap = 0.0;
                let mut grad2 = 0.0;
                for k in 0..n {
                    let s = strides[k];
                    let pos = if k == n - 1 { j } else { lead[k] };
                    let (dm, dp) = (diff(i, i - s), diff(i + s, i));
                    let d2 = dp - dm;
                    lap += d2;
                    let mut back = dm;
                    let mut fwd = dp;
                    if pos >= 2 {
                        back += 0.5 * minmod(d2, dm - diff(i - s, i - 2 * s));
                    }
                    if pos + 2 < res {
                        fwd -= 0.5 * minmod(d2, diff(i + 2 * s, i + s) - dp);
                    }
                    let g = fwd.max(0.0).max(-back.min(0.0));
                    grad2 += g * g;
                }
                let inc = dt * ((m - 1.0) * v * lap + grad2) / (h * h);
                let new = Dd { hi: hi[i], lo: lo[i] } + Dd::from(inc);
                let (mut nh, mut nl) = (new.hi, new.lo);
                if nh < 0.0 || (nh == 0.0 && nl < 0.0) {
                    stats.clamp_norm = stats.clamp_norm.max(-nh);
                    nh = 0.0;
                    nl = 0.0;
                }
                stats.max_v = stats.max_v.max(nh);
                if nh > contact_level && (row_near_boundary || j == 1 || j == res - 2) {
                    stats.boundary_contact = true;
                }
                dst_hi[j] = nh;
                dst_lo[j] = nl;
            }
            stats
        })
        .collect();
    out.t = field.t + dt;
    out.update_mask();
    Ok(row_stats.into_iter().fold(StepStats::default(), |a, b| StepStats {
        clamp_norm: a.clamp_norm.max(b.clamp_norm),
        max_v: a.max_v.max(b.max_v),
        boundary_contact: a.boundary_contact || b.boundary_contact,
    }))
}
