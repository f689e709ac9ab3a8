//! Small dense symmetric matrices: Jacobi eigenvalues, Gershgorin bounds and
//! exact leading principal minors.

use std::cmp::Ordering;

use num_bigint::{BigInt, Sign};
use num_traits::{One, Zero};

use crate::polyjet::{Ext, ExtField};

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let scale = m.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    if scale == 0.0 {
        return vec![0.0; n];
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn max_eigenvalue(a: &[Vec<f64>]) -> f64 {
    jacobi_eigenvalues(a).last().copied().unwrap_or(0.0)
}

/// Upper bound `max_i (a_ii + Σ_{j≠i} |a_ij|)` on the spectrum.
pub fn gershgorin_upper(a: &[Vec<f64>]) -> f64 {
    a.iter()
        .enumerate()
        .map(|(i, row)| row[i] + row.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v.abs()).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Exact commutative ring used by [`leading_minors`].
pub trait MinorRing {
    type Elem: Clone;
    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn is_zero(&self, x: &Self::Elem) -> bool;
    fn add(&self, x: &Self::Elem, y: &Self::Elem) -> Self::Elem;
    fn sub(&self, x: &Self::Elem, y: &Self::Elem) -> Self::Elem;
    fn mul(&self, x: &Self::Elem, y: &Self::Elem) -> Self::Elem;
    fn sign(&self, x: &Self::Elem) -> Ordering;
}

impl MinorRing for ExtField {
    type Elem = Ext;
    fn zero(&self) -> Ext {
        Ext::zero()
    }
    fn one(&self) -> Ext {
        Ext::one()
    }
    fn is_zero(&self, x: &Ext) -> bool {
        x.is_zero()
    }
    fn add(&self, x: &Ext, y: &Ext) -> Ext {
        x.add(y)
    }
    fn sub(&self, x: &Ext, y: &Ext) -> Ext {
        x.sub(y)
    }
    fn mul(&self, x: &Ext, y: &Ext) -> Ext {
        ExtField::mul(self, x, y)
    }
    fn sign(&self, x: &Ext) -> Ordering {
        ExtField::sign(self, x)
    }
}

/// `a + b t` with integer `a, b` and `t = sqrt(t2)`, `t2 >= 0` an integer.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ZExt {
    pub a: BigInt,
    pub b: BigInt,
}

/// The ring `Z[sqrt(t2)]`; `t2 = 0` gives plain integers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZExtRing {
    pub t2: BigInt,
}

impl MinorRing for ZExtRing {
    type Elem = ZExt;
    fn zero(&self) -> ZExt {
        ZExt::default()
    }
    fn one(&self) -> ZExt {
        ZExt { a: BigInt::one(), b: BigInt::zero() }
    }
    fn is_zero(&self, x: &ZExt) -> bool {
        x.a.is_zero() && x.b.is_zero()
    }
    fn add(&self, x: &ZExt, y: &ZExt) -> ZExt {
        ZExt { a: &x.a + &y.a, b: &x.b + &y.b }
    }
    fn sub(&self, x: &ZExt, y: &ZExt) -> ZExt {
        ZExt { a: &x.a - &y.a, b: &x.b - &y.b }
    }
    fn mul(&self, x: &ZExt, y: &ZExt) -> ZExt {
        if x.b.is_zero() && y.b.is_zero() {
            return ZExt { a: &x.a * &y.a, b: BigInt::zero() };
        }
        ZExt { a: &x.a * &y.a + &x.b * &y.b * &self.t2, b: &x.a * &y.b + &x.b * &y.a }
    }
    fn sign(&self, x: &ZExt) -> Ordering {
        let sa = x.a.sign_ord();
        let sb = x.b.sign_ord();
        if sb == Ordering::Equal {
            return sa;
        }
        if sa == Ordering::Equal || sa == sb {
            return sb;
        }
        match (&x.a * &x.a).cmp(&(&x.b * &x.b * &self.t2)) {
            Ordering::Greater => sa,
            Ordering::Less => sb,
            Ordering::Equal => Ordering::Equal,
        }
    }
}

trait SignOrd {
    fn sign_ord(&self) -> Ordering;
}

impl SignOrd for BigInt {
    fn sign_ord(&self) -> Ordering {
        match self.sign() {
            Sign::Minus => Ordering::Less,
            Sign::NoSign => Ordering::Equal,
            Sign::Plus => Ordering::Greater,
        }
    }
}

/// All leading principal minors `det(A[..j, ..j])`, `j = 1..=n`, computed
/// exactly without division by Laplace expansion over column subsets.
///
/// `d[S]` is the determinant of rows `0..|S|` restricted to the columns in `S`.
pub fn leading_minors<R: MinorRing>(a: &[Vec<R::Elem>], ring: &R) -> Vec<R::Elem> {
    let n = a.len();
    assert!(n < 20, "leading_minors is exponential in n");
    let mut d = vec![ring.zero(); 1 << n];
    d[0] = ring.one();
    let mut minors = Vec::with_capacity(n);
    for k in 1..=n {
        let row = &a[k - 1];
        for mask in 1usize..(1 << n) {
            if mask.count_ones() as usize != k {
                continue;
            }
            // expand along the last row; cofactor sign (-1)^(k-1+pos) for column position pos
            let mut acc = ring.zero();
            for (pos, c) in (0..n).filter(|c| mask & (1 << c) != 0).enumerate() {
                let sub = &d[mask & !(1 << c)];
                if ring.is_zero(&row[c]) || ring.is_zero(sub) {
                    continue;
                }
                let term = ring.mul(&row[c], sub);
                acc = if (k - 1 + pos) % 2 == 1 { ring.sub(&acc, &term) } else { ring.add(&acc, &term) };
            }
            d[mask] = acc;
        }
        minors.push(d[(1 << k) - 1].clone());
    }
    minors
}

/// Strict Sylvester pattern for negative definiteness: `(-1)^j minor_j > 0`.
pub fn is_negative_definite<R: MinorRing>(minors: &[R::Elem], ring: &R) -> bool {
    minors.iter().enumerate().all(|(i, mi)| {
        let want = if i % 2 == 0 { Ordering::Less } else { Ordering::Greater };
        ring.sign(mi) == want
    })
}
