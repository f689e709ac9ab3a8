//! Fourth-order centered-difference Hessian of `v^α` (or `log v` for `α = 0`)
//! at the origin, on the `5^n` stencil.

use super::grid::GridField;
use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::linalg::max_eigenvalue;

/// Weights of the fourth-order first difference at offsets `-2, -1, 1, 2`, over `12 h`.
const FIRST: [(i64, f64); 4] = [(-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)];

fn concavity_transform(v: Dd, alpha: f64) -> Result<Dd> {
    if alpha == 0.0 {
        if v.hi > 0.0 {
            Ok(v.ln())
        } else {
            Err(Error::OriginOutsideSupport)
        }
    } else if alpha == 1.0 {
        Ok(v)
    } else {
        Ok(v.powf(Dd::from(alpha)))
    }
}

/// Largest eigenvalue and Hessian of `v^α` at the origin. The stencil is
/// exact on quartic polynomials; values are transformed and differenced in
/// double-double precision.
pub fn probe(field: &GridField, alpha: f64) -> Result<(f64, Vec<Vec<f64>>)> {
    let n = field.n;
    if field.res < 5 {
        return Err(Error::Resolution(field.res));
    }
    let o = field.origin_index() as i64;
    let strides: Vec<i64> = (0..n).map(|k| field.stride(k) as i64).collect();
    let at = |offsets: &[(usize, i64)]| -> usize {
        (o + offsets.iter().map(|&(axis, d)| d * strides[axis]).sum::<i64>()) as usize
    };
    let mut stencil = Vec::new();
    for a in 0..n {
        for &(d, _) in &FIRST {
            stencil.push(at(&[(a, d)]));
        }
        for b in a + 1..n {
            for &(da, _) in &FIRST {
                for &(db, _) in &FIRST {
                    stencil.push(at(&[(a, da), (b, db)]));
                }
            }
        }
    }
    let o = o as usize;
    if field.values[o] <= 0.0 {
        let all_zero = stencil.iter().all(|&i| field.values[i] == 0.0);
        if all_zero && alpha > 0.0 {
            return Ok((0.0, vec![vec![0.0; n]; n]));
        }
        return Err(Error::OriginOutsideSupport);
    }
    let w0 = concavity_transform(field.value_dd(o), alpha)?;
    let w = |i: usize| -> Result<Dd> { Ok(concavity_transform(field.value_dd(i), alpha)? - w0) };
    let h2 = field.h * field.h;
    let mut hess = vec![vec![0.0; n]; n];
    for a in 0..n {
        // (-w(2) + 16 w(1) - 30 w(0) + 16 w(-1) - w(-2)) / (12 h^2), with w(0) = 0 after the shift
        let mut acc = Dd::ZERO;
        for (d, c) in [(-2, -1.0), (-1, 16.0), (1, 16.0), (2, -1.0)] {
            acc = acc + w(at(&[(a, d)]))? * c;
        }
        hess[a][a] = acc.to_f64() / (12.0 * h2);
        for b in a + 1..n {
            let mut acc = Dd::ZERO;
            for &(da, ca) in &FIRST {
                for &(db, cb) in &FIRST {
                    acc = acc + w(at(&[(a, da), (b, db)]))? * (ca * cb);
                }
            }
            let mixed = acc.to_f64() / (144.0 * h2);
            hess[a][b] = mixed;
            hess[b][a] = mixed;
        }
    }
    Ok((max_eigenvalue(&hess), hess))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paraboloid_hessian_is_exact() {
        let g = GridField::from_fn(3, 1.0, 9, |x| Ok((1.0 - x.iter().map(|v| v * v).sum::<f64>()).max(0.0))).unwrap();
        let (l1, hess) = probe(&g, 1.0).unwrap();
        assert!((l1 + 2.0).abs() < 1e-12);
        assert!((hess[0][1]).abs() < 1e-12 && (hess[2][2] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn quartic_hessian_is_exact() {
        // v = 2 + x - x^4 + x y^3 - y^2: Hessian at 0 is [[0, 0], [0, -2]].
        let g = GridField::from_fn(2, 0.5, 33, |x| Ok(2.0 + x[0] - x[0].powi(4) + x[0] * x[1].powi(3) - x[1] * x[1]))
            .unwrap();
        let (l1, hess) = probe(&g, 1.0).unwrap();
        assert!(l1.abs() < 1e-12, "{l1}");
        assert!(hess[0][1].abs() < 1e-12 && (hess[1][1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_term_and_log() {
        let g = GridField::from_fn(2, 1.0, 33, |x| Ok((x[0] * x[1] + 2.0 * x[0] - x[1] * x[1]).exp())).unwrap();
        let (_, hess) = probe(&g, 0.0).unwrap();
        assert!((hess[0][1] - 1.0).abs() < 1e-12);
        assert!((hess[1][1] + 2.0).abs() < 1e-12);
        assert!(hess[0][0].abs() < 1e-12);
    }

    #[test]
    fn fractional_power() {
        // v = (1 - x^2 - 3 y^2)^2, so v^(1/2) has Hessian diag(-2, -6).
        let g = GridField::from_fn(2, 0.5, 33, |x| Ok((1.0 - x[0] * x[0] - 3.0 * x[1] * x[1]).powi(2))).unwrap();
        let (l1, hess) = probe(&g, 0.5).unwrap();
        assert!((l1 + 2.0).abs() < 1e-10 && (hess[1][1] + 6.0).abs() < 1e-10);
    }

    #[test]
    fn origin_outside_support() {
        let g = GridField::from_fn(2, 1.0, 9, |x| Ok((x[0] - 0.1).max(0.0))).unwrap();
        assert_eq!(probe(&g, 1.0).unwrap_err(), Error::OriginOutsideSupport);
        let z = GridField::zeros(2, 1.0, 9).unwrap();
        assert_eq!(probe(&z, 0.5).unwrap().0, 0.0);
        assert!(probe(&z, 0.0).is_err());
    }
}
