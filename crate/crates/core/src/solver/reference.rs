//! Closed-form pressure solutions used to validate the scheme.

/// Barenblatt source solution in pressure form,
/// `v = C0 τ^{-λ} - |x|² / (2kτ)` with `k = n(m-1) + 2`, `λ = n(m-1)/k`, `τ = t + t0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Barenblatt {
    pub n: usize,
    pub m: f64,
    pub c0: f64,
    pub t0: f64,
}

impl Barenblatt {
    fn k(&self) -> f64 {
        self.n as f64 * (self.m - 1.0) + 2.0
    }

    fn lambda(&self) -> f64 {
        self.n as f64 * (self.m - 1.0) / self.k()
    }

    pub fn pressure(&self, x: &[f64], t: f64) -> f64 {
        let tau = t + self.t0;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (self.c0 * tau.powf(-self.lambda()) - r2 / (2.0 * self.k() * tau)).max(0.0)
    }

    pub fn support_radius(&self, t: f64) -> f64 {
        let tau = t + self.t0;
        (2.0 * self.k() * self.c0 * tau.powf(1.0 - self.lambda())).sqrt()
    }

    /// Chooses `C0` so that the support radius at `t = 0` is `radius`.
    pub fn with_radius(n: usize, m: f64, t0: f64, radius: f64) -> Barenblatt {
        let mut b = Barenblatt { n, m, c0: 1.0, t0 };
        b.c0 = radius * radius / (2.0 * b.k() * t0.powf(1.0 - b.lambda()));
        b
    }
}

/// Travelling wave `v = c (x_1 + c t)_+`, front at `x_1 = -c t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TravellingWave {
    pub c: f64,
}

impl TravellingWave {
    pub fn pressure(&self, x: &[f64], t: f64) -> f64 {
        (self.c * (x[0] + self.c * t)).max(0.0)
    }

    pub fn front(&self, t: f64) -> f64 {
        -self.c * t
    }
}

/// Left front of a 1D field: the zero of the line through the first node at
/// or above `level` and its right neighbour. A level above the scheme's tiny
/// precursor values keeps the estimate on the bulk profile.
pub fn front_position(values: &[f64], x0: f64, h: f64, level: f64) -> Option<f64> {
    let i = values.iter().position(|&v| v >= level && v > 0.0)?;
    let (a, b) = (values[i], *values.get(i + 1)?);
    let slope = (b - a) / h;
    (slope > 0.0).then(|| x0 + i as f64 * h - a / slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Residual of `v_t = (m-1) v Δv + |∇v|²` by central differences.
    fn residual(f: impl Fn(&[f64], f64) -> f64, x: &[f64], t: f64, m: f64) -> f64 {
        let e = 1e-4;
        let vt = (f(x, t + e) - f(x, t - e)) / (2.0 * e);
        let v = f(x, t);
        let mut lap = 0.0;
        let mut grad2 = 0.0;
        for k in 0..x.len() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += e;
            xm[k] -= e;
            let (fp, fm) = (f(&xp, t), f(&xm, t));
            lap += (fp - 2.0 * v + fm) / (e * e);
            grad2 += ((fp - fm) / (2.0 * e)).powi(2);
        }
        vt - (m - 1.0) * v * lap - grad2
    }

    #[test]
    fn barenblatt_solves_the_pressure_equation() {
        for (n, m) in [(2, 2.0), (3, 2.0), (1, 3.0), (2, 1.5)] {
            let b = Barenblatt::with_radius(n, m, 0.5, 0.6);
            let x: Vec<f64> = (0..n).map(|k| 0.1 + 0.05 * k as f64).collect();
            assert!(residual(|x, t| b.pressure(x, t), &x, 0.2, m).abs() < 1e-5, "n={n} m={m}");
            let edge: Vec<f64> = std::iter::once(b.support_radius(0.3)).chain(std::iter::repeat(0.0)).take(n).collect();
            assert!(b.pressure(&edge, 0.3) < 1e-12);
        }
    }

    #[test]
    fn barenblatt_n2_m2_matches_the_quadratic_form() {
        let b = Barenblatt { n: 2, m: 2.0, c0: 0.3, t0: 1.0 };
        let tau = 1.5f64;
        let x = [0.2, -0.1];
        let expected = 0.3 / tau.sqrt() - 0.05 / (8.0 * tau);
        assert!((b.pressure(&x, 0.5) - expected).abs() < 1e-15);
    }

    #[test]
    fn travelling_wave_solves_the_pressure_equation() {
        let w = TravellingWave { c: 1.5 };
        assert!(residual(|x, t| w.pressure(x, t), &[0.3], 0.1, 2.0).abs() < 1e-6);
        let h = 0.01;
        let vals: Vec<f64> = (0..100).map(|i| w.pressure(&[-0.5 + i as f64 * h], 0.1)).collect();
        assert!((front_position(&vals, -0.5, h, 0.0).unwrap() - w.front(0.1)).abs() < 1e-12);
    }
}
