//! Deterministic point sets on balls and spheres.
//!
//! Coordinates are quantized to multiples of `rho / 2^16` so that, for dyadic
//! `rho`, every sample is an exact dyadic rational.

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
const QUANT: f64 = 65536.0;

/// Radical inverse of `index` in `base`.
pub fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

fn quantize(u: f64) -> f64 {
    (u * QUANT).round() / QUANT
}

/// `count` Halton points in the closed ball of radius `rho` (origin excluded),
/// by rejection from the cube. `offset` shifts the sequence start.
pub fn ball_points(n: usize, rho: f64, count: usize, offset: u64) -> Vec<Vec<f64>> {
    assert!(n <= PRIMES.len(), "dimension {n} exceeds the Halton prime table");
    let mut out = Vec::with_capacity(count);
    let mut i = offset + 1;
    while out.len() < count {
        let u: Vec<f64> = (0..n).map(|k| quantize(2.0 * halton(i, PRIMES[k]) - 1.0)).collect();
        i += 1;
        let r2: f64 = u.iter().map(|v| v * v).sum();
        if r2 > 1.0 || r2 == 0.0 {
            continue;
        }
        out.push(u.iter().map(|v| v * rho).collect());
    }
    out
}

/// Points along every coordinate axis and every diagonal direction
/// (`e_i ± e_j` and the all-sign main diagonals), at radii `rho * 2^-k`, `k = 0..levels`.
pub fn axes_and_diagonals(n: usize, rho: f64, levels: u32) -> Vec<Vec<f64>> {
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut d = vec![0.0; n];
            d[i] = s;
            dirs.push(d);
        }
    }
    let c2 = (std::f64::consts::FRAC_1_SQRT_2 * QUANT).floor() / QUANT;
    for i in 0..n {
        for j in i + 1..n {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut d = vec![0.0; n];
                d[i] = si * c2;
                d[j] = sj * c2;
                dirs.push(d);
            }
        }
    }
    if n > 2 {
        let cn = ((n as f64).sqrt().recip() * QUANT).floor() / QUANT;
        for signs in 0..(1u32 << n) {
            dirs.push((0..n).map(|k| if signs & (1 << k) != 0 { -cn } else { cn }).collect());
        }
    }
    let mut out = Vec::with_capacity(dirs.len() * levels as usize);
    for k in 0..levels {
        let r = rho * 0.5f64.powi(k as i32);
        for d in &dirs {
            out.push(d.iter().map(|v| v * r).collect());
        }
    }
    out
}

/// The sample set used for the punctured-ball negative definiteness check:
/// `count` Halton points, their copies scaled towards the origin by `2^-k`
/// for `k = 1..=scales` (first `count / 10` points only), and the axis/diagonal set.
pub fn punctured_ball_samples(n: usize, rho: f64, count: usize, scales: u32, offset: u64) -> Vec<Vec<f64>> {
    let base = ball_points(n, rho, count, offset);
    let mut out = base.clone();
    for k in 1..=scales {
        let f = 0.5f64.powi(k as i32);
        out.extend(base.iter().take(count / 10).map(|p| p.iter().map(|v| v * f).collect::<Vec<_>>()));
    }
    out.extend(axes_and_diagonals(n, rho, scales + 1));
    out
}

/// `count` points on the sphere of radius `r` from Halton directions.
pub fn sphere_points(n: usize, r: f64, count: usize, offset: u64) -> Vec<Vec<f64>> {
    ball_points(n, 1.0, count, offset)
        .into_iter()
        .filter_map(|p| {
            let len = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            (len > 1e-3).then(|| p.iter().map(|v| v * r / len).collect())
        })
        .collect()
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_base2() {
        let v: Vec<f64> = (1..=4).map(|i| halton(i, 2)).collect();
        assert_eq!(v, vec![0.5, 0.25, 0.75, 0.125]);
    }

    #[test]
    fn ball_points_are_inside_and_dyadic() {
        let pts = ball_points(3, 0.25, 500, 0);
        assert_eq!(pts.len(), 500);
        for p in &pts {
            assert!(norm(p) <= 0.25 + 1e-15 && norm(p) > 0.0);
            for v in p {
                assert_eq!((v / 0.25 * QUANT).fract(), 0.0);
            }
        }
    }

    #[test]
    fn offsets_change_the_set() {
        assert_ne!(ball_points(2, 1.0, 10, 0), ball_points(2, 1.0, 10, 7));
        assert_eq!(ball_points(2, 1.0, 10, 3), ball_points(2, 1.0, 10, 3));
    }

    #[test]
    fn axes_diagonals_stay_in_ball() {
        let pts = axes_and_diagonals(4, 0.5, 3);
        assert_eq!(pts.len(), 3 * (8 + 24 + 16));
        assert!(pts.iter().all(|p| norm(p) <= 0.5 && norm(p) > 0.0));
    }
}
