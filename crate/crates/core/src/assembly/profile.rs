//! Radial concave profile `f`: constant on `[0, rho/4]`, a quintic bridge on
//! `[rho/4, rho/2]` and a closed-form outer piece on `[rho/2, rho)`.

use std::fmt;

use crate::dd::Dd;
use crate::error::{Error, Result};

/// Radii sampled when checking monotonicity and concavity.
pub const PROFILE_SAMPLES: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaCase {
    /// `alpha ∈ (0, 1)`: outer piece `(rho - r)^alpha`.
    Fractional(f64),
    /// `alpha = 1`: outer piece `rho^2 - r^2`.
    One,
    /// `alpha = 0`: outer piece `log(rho - r)`.
    Zero,
}

impl AlphaCase {
    pub fn from_alpha(alpha: f64) -> Result<AlphaCase> {
        if alpha == 0.0 {
            Ok(AlphaCase::Zero)
        } else if alpha == 1.0 {
            Ok(AlphaCase::One)
        } else if alpha > 0.0 && alpha < 1.0 {
            Ok(AlphaCase::Fractional(alpha))
        } else {
            Err(Error::InvalidParameter(format!("alpha = {alpha} not in [0, 1]")))
        }
    }

    pub fn alpha(self) -> f64 {
        match self {
            AlphaCase::Fractional(a) => a,
            AlphaCase::One => 1.0,
            AlphaCase::Zero => 0.0,
        }
    }
}

impl fmt::Display for AlphaCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaCase::Fractional(_) => f.write_str("fractional"),
            AlphaCase::One => f.write_str("one"),
            AlphaCase::Zero => f.write_str("zero"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadialProfile {
    pub alpha_case: AlphaCase,
    pub rho: f64,
    pub plateau_value: f64,
    /// Coefficients `c_k` of `Σ c_k (r - rho/4)^k`, `k = 0..=5`.
    pub middle: [f64; 6],
    /// Upper bound for `f'` on the outer piece (attained at `r = rho/2`).
    pub fprime_bound: f64,
    /// Upper bound for `f''` on the outer piece.
    pub fsecond_bound: f64,
    /// `C` with `f', f'' <= -1/C` on the outer piece.
    pub derivative_bound_c: f64,
}

impl RadialProfile {
    pub fn inner_knot(&self) -> f64 {
        self.rho / 4.0
    }

    pub fn outer_knot(&self) -> f64 {
        self.rho / 2.0
    }

    /// Closed-form outer piece and two derivatives; valid for `r < rho`.
    pub fn outer(&self, r: f64) -> (f64, f64, f64) {
        let d = self.rho - r;
        match self.alpha_case {
            AlphaCase::Fractional(a) => (d.powf(a), -a * d.powf(a - 1.0), a * (a - 1.0) * d.powf(a - 2.0)),
            AlphaCase::One => (self.rho * self.rho - r * r, -2.0 * r, -2.0),
            AlphaCase::Zero => (d.ln(), -1.0 / d, -1.0 / (d * d)),
        }
    }

    /// `(f, f', f'')` at radius `r ∈ [0, rho)`.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        if r <= self.inner_knot() {
            (self.plateau_value, 0.0, 0.0)
        } else if r < self.outer_knot() {
            let t = r - self.inner_knot();
            let c = &self.middle;
            let v = c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))));
            let d1 = c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * (4.0 * c[4] + t * 5.0 * c[5])));
            let d2 = 2.0 * c[2] + t * (6.0 * c[3] + t * (12.0 * c[4] + t * 20.0 * c[5]));
            (v, d1, d2)
        } else {
            self.outer(r)
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.eval(r).0
    }

    /// `f(r)` in double-double precision.
    pub fn value_dd(&self, r: Dd) -> Dd {
        if r.hi <= self.inner_knot() {
            Dd::from(self.plateau_value)
        } else if r.hi < self.outer_knot() {
            let t = r - Dd::from(self.inner_knot());
            self.middle.iter().rev().fold(Dd::ZERO, |acc, &c| acc * t + Dd::from(c))
        } else {
            let rho = Dd::from(self.rho);
            match self.alpha_case {
                AlphaCase::Fractional(a) => (rho - r).powf(Dd::from(a)),
                AlphaCase::One => rho * rho - r * r,
                AlphaCase::Zero => (rho - r).ln(),
            }
        }
    }
}

/// Builds the profile for `alpha` on `B_rho` and checks it on a radial sample.
pub fn build_profile(alpha: f64, rho: f64) -> Result<RadialProfile> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("rho = {rho} must be positive")));
    }
    let alpha_case = AlphaCase::from_alpha(alpha)?;
    let half = rho / 2.0;
    let (plateau_value, fprime_bound, fsecond_bound) = match alpha_case {
        AlphaCase::Fractional(a) => {
            ((1.0 + a / 4.0) * half.powf(a), -a * half.powf(a - 1.0), a * (a - 1.0) * half.powf(a - 2.0))
        }
        AlphaCase::One => (7.0 * rho * rho / 8.0, -rho, -2.0),
        // raised by 1/4 so that the bridge can be strictly decreasing
        AlphaCase::Zero => (half.ln() + 0.25, -1.0 / half, -1.0 / (half * half)),
    };
    let mut p = RadialProfile {
        alpha_case,
        rho,
        plateau_value,
        middle: [0.0; 6],
        fprime_bound,
        fsecond_bound,
        derivative_bound_c: (-1.0 / fprime_bound).max(-1.0 / fsecond_bound),
    };
    let (f1, d1, d2) = p.outer(half);
    let h = rho / 4.0;
    let (e0, e1, e2) = (f1 - plateau_value, d1 * h, d2 * h * h);
    let u3 = 10.0 * e0 - 4.0 * e1 + 0.5 * e2;
    let u4 = -15.0 * e0 + 7.0 * e1 - e2;
    let u5 = 6.0 * e0 - 3.0 * e1 + 0.5 * e2;
    p.middle = [plateau_value, 0.0, 0.0, u3 / h.powi(3), u4 / h.powi(4), u5 / h.powi(5)];
    check_profile(&p)?;
    Ok(p)
}

fn check_profile(p: &RadialProfile) -> Result<()> {
    let rho = p.rho;
    let tol = 1e-12 * (1.0 + p.plateau_value.abs());
    for i in 1..PROFILE_SAMPLES {
        let r = rho * i as f64 / PROFILE_SAMPLES as f64;
        let (_, d1, d2) = p.eval(r);
        let scale = 1.0 + d1.abs() / rho + d2.abs();
        if d1 > tol * scale || d2 > tol * scale {
            return Err(Error::Profile(format!("f' = {d1}, f'' = {d2} at r = {r}")));
        }
        if r >= p.outer_knot() && (d1 > p.fprime_bound * (1.0 - 1e-12) || d2 > p.fsecond_bound * (1.0 - 1e-12)) {
            return Err(Error::Profile(format!("outer bound violated at r = {r}")));
        }
    }
    let h = p.outer_knot();
    let left = {
        let t = h - p.inner_knot();
        let c = &p.middle;
        (
            c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5])))),
            c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * (4.0 * c[4] + t * 5.0 * c[5]))),
            2.0 * c[2] + t * (6.0 * c[3] + t * (12.0 * c[4] + t * 20.0 * c[5])),
        )
    };
    let right = p.outer(h);
    let scale = 1.0 + right.0.abs() + right.1.abs() * rho + right.2.abs() * rho * rho;
    if (left.0 - right.0).abs() + (left.1 - right.1).abs() * rho + (left.2 - right.2).abs() * rho * rho > 1e-9 * scale {
        return Err(Error::Profile(format!("bridge does not match the outer piece: {left:?} vs {right:?}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_one_values() {
        let p = build_profile(1.0, 1.0).unwrap();
        assert_eq!(p.value(0.25), 0.875);
        assert_eq!(p.value(0.75), 0.4375);
        assert_eq!(p.value(0.0), 0.875);
    }

    #[test]
    fn fractional_values() {
        let p = build_profile(0.25, 1.0).unwrap();
        assert!((p.value(0.5) - 0.5f64.powf(0.25)).abs() < 1e-12);
        assert!((p.value(0.5) - 0.840896).abs() < 1e-6);
        assert!((p.plateau_value - 0.893452).abs() < 1e-6);
    }

    #[test]
    fn log_values() {
        let p = build_profile(0.0, 1.0).unwrap();
        assert!((p.value(0.5) + 0.693147).abs() < 1e-6);
        assert!((p.plateau_value - (0.5f64.ln() + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn bridge_is_c2_at_both_knots() {
        for alpha in [0.0, 0.1, 0.25, 0.4, 0.6, 0.75, 0.9, 1.0] {
            let p = build_profile(alpha, 0.5).unwrap();
            let eps = 1e-9;
            for knot in [p.inner_knot(), p.outer_knot()] {
                let (a, b) = (p.eval(knot - eps), p.eval(knot + eps));
                assert!(
                    (a.0 - b.0).abs() < 1e-7
                        && (a.1 - b.1).abs() < 1e-5
                        && (a.2 - b.2).abs() < 1e-3 * (1.0 + a.2.abs())
                );
            }
        }
    }

    #[test]
    fn profile_scales_with_radius() {
        for alpha in [0.25, 0.75] {
            let p1 = build_profile(alpha, 1.0).unwrap();
            let p = build_profile(alpha, 0.25).unwrap();
            for s in [0.1, 0.3, 0.4, 0.6, 0.9] {
                let want = 0.25f64.powf(alpha) * p1.value(s);
                assert!((p.value(0.25 * s) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn out_of_range_alpha() {
        assert!(build_profile(1.5, 1.0).is_err());
        assert!(build_profile(0.5, -1.0).is_err());
    }
}
