//! Exact scalars: rationals and elements of the quadratic extension Q(s), s = sqrt(s2).

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qr(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

/// Exact rational value of a finite `f64`, preferring a short continued-fraction
/// convergent (denominator up to 10^6) when it reproduces the float to within
/// one part in 10^15. `0.6` becomes `3/5`, grid values like `1.5234375` stay dyadic.
pub fn q_from_f64(x: f64) -> Q {
    assert!(x.is_finite(), "non-finite value {x}");
    if x == x.trunc() && x.abs() < 9.0e15 {
        return q(x as i64);
    }
    if let Some(r) = short_convergent(x, 1_000_000) {
        return r;
    }
    Q::from_float(x).expect("finite")
}

fn short_convergent(x: f64, max_den: i64) -> Option<Q> {
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            return None;
        }
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > max_den as i128 {
            return None;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let approx = h1 as f64 / k1 as f64;
        if (approx - x).abs() <= 1e-15 * x.abs().max(1e-300) {
            return Some(Q::new(BigInt::from(h1), BigInt::from(k1)));
        }
        let frac = r - a;
        if frac == 0.0 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

pub fn q_to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // very large numerators/denominators: scale through the bit lengths
        let n = x.numer();
        let d = x.denom();
        let shift = n.bits().max(d.bits()) as i64 - 900;
        let (n, d) = if shift > 0 { (n >> shift as usize, d >> shift as usize) } else { (n.clone(), d.clone()) };
        n.to_f64().unwrap_or(f64::NAN) / d.to_f64().unwrap_or(f64::NAN)
    })
}

/// `num/den` with an explicit denominator, always.
pub fn format_q(x: &Q) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

pub fn parse_q(s: &str) -> Option<Q> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(Q::new(n, d))
        }
        None => Some(Q::from_integer(s.parse().ok()?)),
    }
}

/// `a + b*s` with `s = sqrt(s2)` for a rational `s2` held by the owning context.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Ext {
    pub a: Q,
    pub b: Q,
}

impl fmt::Debug for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_zero() {
            write!(f, "{}", self.a)
        } else {
            write!(f, "{} + {}*s", self.a, self.b)
        }
    }
}

impl From<Q> for Ext {
    fn from(a: Q) -> Self {
        Ext { a, b: Q::zero() }
    }
}

impl Ext {
    pub fn new(a: Q, b: Q) -> Self {
        Ext { a, b }
    }

    pub fn zero() -> Self {
        Ext::default()
    }

    pub fn one() -> Self {
        Ext::from(Q::one())
    }

    pub fn int(n: i64) -> Self {
        Ext::from(q(n))
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    pub fn add(&self, o: &Ext) -> Ext {
        Ext { a: &self.a + &o.a, b: &self.b + &o.b }
    }

    pub fn sub(&self, o: &Ext) -> Ext {
        Ext { a: &self.a - &o.a, b: &self.b - &o.b }
    }

    pub fn neg(&self) -> Ext {
        Ext { a: -&self.a, b: -&self.b }
    }

    pub fn scale(&self, k: &Q) -> Ext {
        Ext { a: &self.a * k, b: &self.b * k }
    }

    pub fn to_f64(&self, s: f64) -> f64 {
        if self.b.is_zero() {
            q_to_f64(&self.a)
        } else {
            q_to_f64(&self.a) + q_to_f64(&self.b) * s
        }
    }
}

/// Arithmetic context for [`Ext`]: carries `s2`, or `None` for plain rationals.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExtField {
    pub s2: Option<Q>,
}

impl ExtField {
    pub fn rational() -> Self {
        ExtField { s2: None }
    }

    pub fn with_s2(s2: Q) -> Self {
        assert!(s2.is_positive(), "s2 must be positive");
        ExtField { s2: Some(s2) }
    }

    pub fn s_f64(&self) -> f64 {
        self.s2.as_ref().map_or(0.0, |s2| q_to_f64(s2).sqrt())
    }

    pub fn mul(&self, x: &Ext, y: &Ext) -> Ext {
        if x.b.is_zero() && y.b.is_zero() {
            return Ext::from(&x.a * &y.a);
        }
        let s2 = self.s2.as_ref().expect("extension element in a rational context");
        Ext { a: &x.a * &y.a + &x.b * &y.b * s2, b: &x.a * &y.b + &x.b * &y.a }
    }

    /// Field norm `a^2 - b^2 s2`.
    pub fn norm(&self, x: &Ext) -> Q {
        if x.b.is_zero() {
            return &x.a * &x.a;
        }
        let s2 = self.s2.as_ref().expect("extension element in a rational context");
        &x.a * &x.a - &x.b * &x.b * s2
    }

    pub fn inv(&self, x: &Ext) -> Option<Ext> {
        if x.is_zero() {
            return None;
        }
        if x.b.is_zero() {
            return Some(Ext::from(x.a.recip()));
        }
        let nrm = self.norm(x);
        if nrm.is_zero() {
            return None;
        }
        Some(Ext { a: &x.a / &nrm, b: -&x.b / &nrm })
    }

    pub fn div(&self, x: &Ext, y: &Ext) -> Option<Ext> {
        Some(self.mul(x, &self.inv(y)?))
    }

    pub fn pow(&self, x: &Ext, e: u32) -> Ext {
        let mut acc = Ext::one();
        for _ in 0..e {
            acc = self.mul(&acc, x);
        }
        acc
    }

    /// Exact sign of `a + b*s` with `s > 0`.
    pub fn sign(&self, x: &Ext) -> Ordering {
        let sa = x.a.cmp(&Q::zero());
        let sb = x.b.cmp(&Q::zero());
        if sb == Ordering::Equal {
            return sa;
        }
        if sa == Ordering::Equal || sa == sb {
            return sb;
        }
        let s2 = self.s2.as_ref().expect("extension element in a rational context");
        let lhs = &x.a * &x.a;
        let rhs = &x.b * &x.b * s2;
        match lhs.cmp(&rhs) {
            Ordering::Greater => sa,
            Ordering::Less => sb,
            Ordering::Equal => Ordering::Equal,
        }
    }

    pub fn to_f64(&self, x: &Ext) -> f64 {
        x.to_f64(self.s_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_rationals_are_recovered() {
        assert_eq!(q_from_f64(0.6), qr(3, 5));
        assert_eq!(q_from_f64(0.75), qr(3, 4));
        assert_eq!(q_from_f64(0.1), qr(1, 10));
        assert_eq!(q_from_f64(-2.0), q(-2));
        assert_eq!(q_from_f64(1.5234375), qr(195, 128));
    }

    #[test]
    fn format_roundtrip() {
        let x = qr(-7, 12);
        assert_eq!(format_q(&x), "-7/12");
        assert_eq!(parse_q("-7/12"), Some(x));
        assert_eq!(parse_q("3"), Some(q(3)));
        assert_eq!(parse_q("1/0"), None);
    }

    #[test]
    fn extension_sign_is_exact() {
        let f = ExtField::with_s2(qr(3, 4));
        assert_eq!(f.sign(&Ext::new(q(1), q(-1))), Ordering::Greater); // 1 - 0.866
        assert_eq!(f.sign(&Ext::new(q(-1), q(2))), Ordering::Greater);
        assert_eq!(f.sign(&Ext::new(q(-1), qr(1, 2))), Ordering::Less);
        let g = ExtField::with_s2(q(4));
        assert_eq!(g.sign(&Ext::new(q(2), q(-1))), Ordering::Equal);
    }

    #[test]
    fn extension_inverse() {
        let f = ExtField::with_s2(qr(9, 10));
        let x = Ext::new(qr(3, 7), qr(-5, 2));
        let y = f.mul(&x, &f.inv(&x).unwrap());
        assert_eq!(y, Ext::one());
    }
}
