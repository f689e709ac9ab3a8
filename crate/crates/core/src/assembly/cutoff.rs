//! Smooth radial cutoff equal to 1 on `B_{rho/2}` and 0 outside `B_{3 rho/4}`.

use crate::dd::Dd;
use crate::error::{Error, Result};

/// Radial samples used for the derivative bound.
pub const CUTOFF_SAMPLES: usize = 10_000;

/// `g(s) = e^{-1/s}` for `s > 0`, else 0, with its first two derivatives.
fn g(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let v = (-1.0 / s).exp();
    let s2 = s * s;
    (v, v / s2, v * (1.0 / (s2 * s2) - 2.0 / (s2 * s)))
}

/// Smooth step `S(s) = g(s) / (g(s) + g(1 - s))` and two derivatives.
pub fn smooth_step(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let (a, a1, a2) = g(s);
    let (b, bm1, bm2) = g(1.0 - s);
    // d/ds g(1-s) = -g'(1-s), second derivative g''(1-s)
    let (b1, b2) = (-bm1, bm2);
    let den = a + b;
    let num = a1 * b - a * b1;
    let num1 = a2 * b - a * b2;
    let v = a / den;
    let d1 = num / (den * den);
    let d2 = (num1 * den - 2.0 * num * (a1 + b1)) / (den * den * den);
    (v, d1, d2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cutoff {
    pub rho: f64,
    /// `max |Dψ| + |D^2 ψ|` over the radial sample.
    pub c_psi: f64,
}

impl Cutoff {
    pub fn inner(&self) -> f64 {
        self.rho / 2.0
    }

    pub fn outer(&self) -> f64 {
        0.75 * self.rho
    }

    /// `(ψ, ψ', ψ'')` as functions of the radius.
    pub fn radial(&self, r: f64) -> (f64, f64, f64) {
        let width = self.outer() - self.inner();
        let (s, s1, s2) = smooth_step((r - self.inner()) / width);
        (1.0 - s, -s1 / width, -s2 / (width * width))
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.radial(crate::sampling::norm(x)).0
    }

    /// `ψ` at radius `r` in double-double precision.
    pub fn radial_dd(&self, r: Dd) -> Dd {
        let inner = Dd::from(self.inner());
        let width = Dd::from(self.outer()) - inner;
        let s = (r - inner) / width;
        if s.hi <= 0.0 {
            return Dd::ONE;
        }
        if s.hi >= 1.0 {
            return Dd::ZERO;
        }
        let g = |t: Dd| (-(Dd::ONE / t)).exp();
        let (a, b) = (g(s), g(Dd::ONE - s));
        b / (a + b)
    }

    /// `|Dψ| + |D^2 ψ|` at radius `r`, using the spectral norm of the radial Hessian.
    pub fn derivative_size(&self, r: f64) -> f64 {
        let (_, d1, d2) = self.radial(r);
        let tangential = if r > 0.0 { d1.abs() / r } else { 0.0 };
        d1.abs() + d2.abs().max(tangential)
    }
}

pub fn build_cutoff(rho: f64) -> Result<Cutoff> {
    build_cutoff_sampled(rho, CUTOFF_SAMPLES)
}

/// Cutoff with `C_psi` taken over `samples` equally spaced radii in `[0, rho]`.
pub fn build_cutoff_sampled(rho: f64, samples: usize) -> Result<Cutoff> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("rho = {rho} must be positive")));
    }
    let mut c = Cutoff { rho, c_psi: 0.0 };
    let c_psi = (0..=samples).map(|i| c.derivative_size(rho * i as f64 / samples as f64)).fold(0.0, f64::max);
    c.c_psi = c_psi;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateaus() {
        let c = build_cutoff(1.0).unwrap();
        assert_eq!(c.value(&[0.0, 0.0]), 1.0);
        assert_eq!(c.value(&[0.5, 0.0]), 1.0);
        assert_eq!(c.value(&[0.0, 0.9]), 0.0);
        let mid = c.radial(0.625).0;
        assert!((mid - 0.5).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let c = build_cutoff(0.8).unwrap();
        let h = 1e-6;
        for r in [0.42, 0.5, 0.55, 0.59] {
            let (v0, d1, d2) = c.radial(r);
            let (vp, d1p, _) = c.radial(r + h);
            let (vm, d1m, _) = c.radial(r - h);
            assert!(((vp - vm) / (2.0 * h) - d1).abs() < 1e-5 * (1.0 + d1.abs()), "r {r}");
            assert!(((d1p - d1m) / (2.0 * h) - d2).abs() < 1e-4 * (1.0 + d2.abs()), "r {r}");
            assert!((0.0..=1.0).contains(&v0));
        }
    }

    #[test]
    fn bound_is_resolution_stable() {
        let a = build_cutoff_sampled(1.0, 10_000).unwrap().c_psi;
        let b = build_cutoff_sampled(1.0, 20_000).unwrap().c_psi;
        assert!(a.is_finite() && a > 0.0);
        assert!((a - b).abs() < 0.01 * a);
    }

    #[test]
    fn bound_scales_with_radius() {
        let c1 = build_cutoff(1.0).unwrap().c_psi;
        for rho in [0.25, 0.5, 2.0] {
            let c = build_cutoff(rho).unwrap().c_psi;
            let hi = c1 * (1.0 / rho).max(1.0 / (rho * rho));
            let lo = c1 * (1.0 / rho).min(1.0 / (rho * rho));
            assert!(c <= hi * 1.01 && c >= lo * 0.99, "rho {rho}: {c} not in [{lo}, {hi}]");
        }
    }
}
