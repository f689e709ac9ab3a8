//! Sparse multivariate polynomials with exact coefficients in Q or Q(s).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::number::{format_q, parse_q, q, Ext, ExtField, Q};
use crate::error::{Error, Result};

/// Exponent vector; its length is the ambient dimension.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut e = vec![0; dim];
        e[axis] = 1;
        MultiIndex(e)
    }

    /// `e_i + e_j + ...` for the listed axes.
    pub fn from_axes(dim: usize, axes: &[usize]) -> Self {
        let mut e = vec![0; dim];
        for &a in axes {
            e[a] += 1;
        }
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Product of the factorials of the exponents.
    pub fn factorial(&self) -> u64 {
        self.0.iter().map(|&e| (1..=e as u64).product::<u64>()).product()
    }

    pub fn add(&self, o: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }
}

/// Exact polynomial. Coefficients live in Q(s) with `s^2 = s2` when `s2` is set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Poly {
    dim: usize,
    field: ExtField,
    terms: BTreeMap<MultiIndex, Ext>,
}

impl Poly {
    pub fn zero(dim: usize, field: ExtField) -> Self {
        Poly { dim, field, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, field: ExtField, c: Ext) -> Self {
        let mut p = Poly::zero(dim, field);
        p.add_term(MultiIndex::zero(dim), c);
        p
    }

    pub fn monomial(dim: usize, field: ExtField, idx: MultiIndex, c: Ext) -> Self {
        assert_eq!(idx.dim(), dim);
        let mut p = Poly::zero(dim, field);
        p.add_term(idx, c);
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn field(&self) -> &ExtField {
        &self.field
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Ext)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, idx: &MultiIndex) -> Ext {
        self.terms.get(idx).cloned().unwrap_or_default()
    }

    /// Accumulates `c * x^idx`, dropping the entry if it cancels.
    pub fn add_term(&mut self, idx: MultiIndex, c: Ext) {
        assert_eq!(idx.dim(), self.dim, "term index length");
        if c.is_zero() {
            return;
        }
        let sum = match self.terms.remove(&idx) {
            Some(old) => old.add(&c),
            None => c,
        };
        if !sum.is_zero() {
            self.terms.insert(idx, sum);
        }
    }

    fn joined_field(&self, o: &Poly) -> ExtField {
        match (&self.field.s2, &o.field.s2) {
            (Some(a), Some(b)) => {
                assert_eq!(a, b, "polynomials over different extensions");
                self.field.clone()
            }
            (Some(_), None) => self.field.clone(),
            _ => o.field.clone(),
        }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        assert_eq!(self.dim, o.dim);
        let mut r = self.clone();
        r.field = self.joined_field(o);
        for (k, v) in &o.terms {
            r.add_term(k.clone(), v.clone());
        }
        r
    }

    pub fn neg(&self) -> Poly {
        Poly {
            dim: self.dim,
            field: self.field.clone(),
            terms: self.terms.iter().map(|(k, v)| (k.clone(), v.neg())).collect(),
        }
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        assert_eq!(self.dim, o.dim);
        let field = self.joined_field(o);
        let mut r = Poly::zero(self.dim, field.clone());
        for (ka, va) in &self.terms {
            for (kb, vb) in &o.terms {
                r.add_term(ka.add(kb), field.mul(va, vb));
            }
        }
        r
    }

    pub fn scale(&self, c: &Ext) -> Poly {
        let mut r = Poly::zero(self.dim, self.field.clone());
        for (k, v) in &self.terms {
            r.add_term(k.clone(), self.field.mul(v, c));
        }
        r
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut acc = Poly::constant(self.dim, self.field.clone(), Ext::one());
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Exact partial derivative `d^idx p`.
    pub fn derive(&self, idx: &MultiIndex) -> Result<Poly> {
        if idx.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: idx.dim() });
        }
        let mut r = Poly::zero(self.dim, self.field.clone());
        'terms: for (k, v) in &self.terms {
            let mut factor = BigInt::one();
            let mut e = Vec::with_capacity(self.dim);
            for (&have, &take) in k.0.iter().zip(&idx.0) {
                if take > have {
                    continue 'terms;
                }
                for j in 0..take {
                    factor *= BigInt::from(have - j);
                }
                e.push(have - take);
            }
            r.add_term(MultiIndex(e), v.scale(&Q::from_integer(factor)));
        }
        Ok(r)
    }

    /// Derivative along the listed axes, e.g. `&[0, 0]` for the second x1-derivative.
    pub fn partial(&self, axes: &[usize]) -> Poly {
        self.derive(&MultiIndex::from_axes(self.dim, axes)).expect("axes within dimension")
    }

    pub fn eval(&self, x: &[Q]) -> Result<Ext> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let mut acc = Ext::zero();
        for (k, v) in &self.terms {
            let mut mono = Q::one();
            for (xi, &e) in x.iter().zip(&k.0) {
                for _ in 0..e {
                    mono *= xi;
                }
            }
            acc = acc.add(&v.scale(&mono));
        }
        Ok(acc)
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        let s = self.field.s_f64();
        self.terms
            .iter()
            .map(|(k, v)| v.to_f64(s) * k.0.iter().zip(x).map(|(&e, xi)| xi.powi(e as i32)).product::<f64>())
            .sum()
    }

    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(MultiIndex::order).max()
    }

    pub fn min_degree(&self) -> Option<u32> {
        self.terms.keys().map(MultiIndex::order).min()
    }

    pub fn homogeneous_part(&self, deg: u32) -> Poly {
        Poly {
            dim: self.dim,
            field: self.field.clone(),
            terms: self.terms.iter().filter(|(k, _)| k.order() == deg).map(|(k, v)| (k.clone(), v.clone())).collect(),
        }
    }

    /// Terms of total degree at most `deg`.
    pub fn truncate(&self, deg: u32) -> Poly {
        Poly {
            dim: self.dim,
            field: self.field.clone(),
            terms: self.terms.iter().filter(|(k, _)| k.order() <= deg).map(|(k, v)| (k.clone(), v.clone())).collect(),
        }
    }

    /// `p(x0 + y)` as a polynomial in `y`.
    pub fn shift(&self, x0: &[Q]) -> Result<Poly> {
        if x0.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x0.len() });
        }
        let one = Ext::one();
        let lin: Vec<Poly> = (0..self.dim)
            .map(|i| {
                let mut p = Poly::monomial(self.dim, self.field.clone(), MultiIndex::unit(self.dim, i), one.clone());
                p.add_term(MultiIndex::zero(self.dim), Ext::from(x0[i].clone()));
                p
            })
            .collect();
        let mut r = Poly::zero(self.dim, self.field.clone());
        for (k, v) in &self.terms {
            let mut t = Poly::constant(self.dim, self.field.clone(), v.clone());
            for (i, &e) in k.0.iter().enumerate() {
                if e > 0 {
                    t = t.mul(&lin[i].pow(e));
                }
            }
            r = r.add(&t);
        }
        Ok(r)
    }

    /// Relabels variables: variable `i` of the result is variable `perm[i]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Poly {
        assert_eq!(perm.len(), self.dim);
        let mut r = Poly::zero(self.dim, self.field.clone());
        for (k, v) in &self.terms {
            let e = (0..self.dim).map(|i| k.0[perm[i]]).collect();
            r.add_term(MultiIndex(e), v.clone());
        }
        r
    }

    /// Substitutes `x_axis -> -x_axis`.
    pub fn flip(&self, axis: usize) -> Poly {
        let mut r = Poly::zero(self.dim, self.field.clone());
        for (k, v) in &self.terms {
            let c = if k.0[axis] % 2 == 1 { v.neg() } else { v.clone() };
            r.add_term(k.clone(), c);
        }
        r
    }

    /// Text exchange format: a `dim=n s2=<q>|none` header, then one
    /// `e1 ... en : num/den [+ num/den * s]` line per term in index order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let s2 = match &self.field.s2 {
            Some(s2) => format_q(s2),
            None => "none".to_string(),
        };
        writeln!(out, "dim={} s2={}", self.dim, s2).unwrap();
        for (k, v) in &self.terms {
            let exps: Vec<String> = k.0.iter().map(u32::to_string).collect();
            write!(out, "{} : {}", exps.join(" "), format_q(&v.a)).unwrap();
            if !v.b.is_zero() {
                write!(out, " + {} * s", format_q(&v.b)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Poly> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty input".into() })?;
        let perr = |line: usize, msg: &str| Error::Parse { line: line + 1, msg: msg.to_string() };
        let mut dim = None;
        let mut s2 = None;
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("dim", v)) => dim = Some(v.parse::<usize>().map_err(|_| perr(0, "bad dim"))?),
                Some(("s2", "none")) => s2 = Some(None),
                Some(("s2", v)) => s2 = Some(Some(parse_q(v).ok_or_else(|| perr(0, "bad s2"))?)),
                _ => return Err(perr(0, "unknown header field")),
            }
        }
        let dim = dim.ok_or_else(|| perr(0, "missing dim"))?;
        let field = match s2.ok_or_else(|| perr(0, "missing s2"))? {
            Some(v) if v > Q::zero() => ExtField::with_s2(v),
            Some(_) => return Err(perr(0, "s2 must be positive")),
            None => ExtField::rational(),
        };
        let mut p = Poly::zero(dim, field);
        for (ln, line) in lines {
            let (exps, coeff) = line.split_once(':').ok_or_else(|| perr(ln, "missing ':'"))?;
            let e: Vec<u32> = exps
                .split_whitespace()
                .map(|t| t.parse::<u32>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| perr(ln, "bad exponent"))?;
            if e.len() != dim {
                return Err(perr(ln, "exponent count differs from dim"));
            }
            let (a, b) = match coeff.split_once('+') {
                Some((a, rest)) => {
                    let rest = rest.trim();
                    let b = rest.strip_suffix('s').and_then(|r| r.trim().strip_suffix('*'));
                    let b = b.ok_or_else(|| perr(ln, "extension part must end in '* s'"))?;
                    (a, Some(b))
                }
                None => (coeff, None),
            };
            let a = parse_q(a).ok_or_else(|| perr(ln, "bad rational"))?;
            let b = match b {
                Some(b) => parse_q(b).ok_or_else(|| perr(ln, "bad rational"))?,
                None => Q::zero(),
            };
            if !b.is_zero() && p.field.s2.is_none() {
                return Err(perr(ln, "extension coefficient without s2"));
            }
            p.add_term(MultiIndex(e), Ext::new(a, b));
        }
        Ok(p)
    }
}

/// Builds a polynomial from `(exponents, rational)` pairs over Q.
pub fn poly_from_ints(dim: usize, terms: &[(&[u32], i64)]) -> Poly {
    let mut p = Poly::zero(dim, ExtField::rational());
    for (e, c) in terms {
        p.add_term(MultiIndex(e.to_vec()), Ext::from(q(*c)));
    }
    p
}

/// Coefficient values converted to floating point, keyed by index.
pub fn coefficients_f64(p: &Poly) -> Vec<(MultiIndex, f64)> {
    let s = p.field().s_f64();
    p.terms().map(|(k, v)| (k.clone(), v.to_f64(s))).collect()
}
