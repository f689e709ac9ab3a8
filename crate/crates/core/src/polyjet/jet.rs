//! Point-local Taylor tables truncated at order 4.
//!
//! A [`Jet`] stores Taylor coefficients `c_idx = d^idx f(x0) / idx!`, so products
//! are truncated convolutions. Spatial differentiation lowers the order up to
//! which the table is meaningful; that order is tracked per jet.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::Zero;

use super::number::{q_from_f64, Q};
use super::poly::{MultiIndex, Poly};
use crate::error::{Error, Result};

/// Truncation order shared by every jet.
pub const JET_ORDER: u32 = 4;

/// Enumeration of the multi-indices of order <= 4 in a fixed dimension,
/// with precomputed product and derivative tables.
#[derive(Debug)]
pub struct Layout {
    dim: usize,
    indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    products: Vec<(usize, usize, usize)>,
    // shift[i][axis] = position of indices[i] + e_axis
    shift: Vec<Vec<Option<usize>>>,
}

impl Layout {
    fn new(dim: usize) -> Layout {
        let mut indices = Vec::new();
        for order in 0..=JET_ORDER {
            let mut cur = vec![0u32; dim];
            enumerate(&mut indices, &mut cur, 0, order);
        }
        let lookup: HashMap<_, _> = indices.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
        let mut products = Vec::new();
        for (i, a) in indices.iter().enumerate() {
            for (j, b) in indices.iter().enumerate() {
                if a.order() + b.order() <= JET_ORDER {
                    products.push((i, j, lookup[&a.add(b)]));
                }
            }
        }
        let shift = indices
            .iter()
            .map(|k| (0..dim).map(|ax| lookup.get(&k.add(&MultiIndex::unit(dim, ax))).copied()).collect())
            .collect();
        Layout { dim, indices, lookup, products, shift }
    }

    /// Shared layout for `dim`.
    pub fn get(dim: usize) -> Arc<Layout> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Layout>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("layout cache poisoned");
        guard.entry(dim).or_insert_with(|| Arc::new(Layout::new(dim))).clone()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, idx: &MultiIndex) -> Option<usize> {
        self.lookup.get(idx).copied()
    }
}

// fills exponents for axes >= `axis` summing to `left`, lexicographically descending
fn enumerate(out: &mut Vec<MultiIndex>, cur: &mut [u32], axis: usize, left: u32) {
    if axis + 1 == cur.len() {
        cur[axis] = left;
        out.push(MultiIndex(cur.to_vec()));
        cur[axis] = 0;
        return;
    }
    if cur.is_empty() {
        return;
    }
    for e in (0..=left).rev() {
        cur[axis] = e;
        enumerate(out, cur, axis + 1, left - e);
    }
    cur[axis] = 0;
}

#[derive(Clone, Debug)]
pub struct Jet {
    layout: Arc<Layout>,
    base: Vec<f64>,
    coeffs: Vec<f64>,
    order: u32,
}

/// Operand for [`jet_combine`].
#[derive(Clone, Copy, Debug)]
pub enum Combine<'a> {
    Add(&'a Jet),
    Mul(&'a Jet),
    Scale(f64),
}

impl Jet {
    pub fn zero(dim: usize, base: &[f64]) -> Jet {
        assert_eq!(dim, base.len());
        let layout = Layout::get(dim);
        let coeffs = vec![0.0; layout.len()];
        Jet { layout, base: base.to_vec(), coeffs, order: JET_ORDER }
    }

    pub fn constant(dim: usize, base: &[f64], c: f64) -> Jet {
        let mut j = Jet::zero(dim, base);
        j.coeffs[0] = c;
        j
    }

    /// Jet of the coordinate function `x_axis`.
    pub fn variable(dim: usize, base: &[f64], axis: usize) -> Jet {
        let mut j = Jet::constant(dim, base, base[axis]);
        let pos = j.layout.position(&MultiIndex::unit(dim, axis)).unwrap();
        j.coeffs[pos] = 1.0;
        j
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    /// Highest order whose coefficients are meaningful.
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Taylor coefficient at `idx`; zero above the valid order.
    pub fn coeff(&self, idx: &MultiIndex) -> f64 {
        if idx.order() > self.order {
            return 0.0;
        }
        self.layout.position(idx).map_or(0.0, |p| self.coeffs[p])
    }

    pub fn set_coeff(&mut self, idx: &MultiIndex, c: f64) {
        let p = self.layout.position(idx).expect("index within order 4");
        self.coeffs[p] = c;
    }

    /// Partial derivative value `d^idx f(x0)`.
    pub fn derivative(&self, idx: &MultiIndex) -> f64 {
        assert!(idx.order() <= self.order, "derivative order {} above jet order {}", idx.order(), self.order);
        self.coeff(idx) * idx.factorial() as f64
    }

    /// Derivative along listed axes, e.g. `&[0, 0]` for f_11.
    pub fn d(&self, axes: &[usize]) -> f64 {
        self.derivative(&MultiIndex::from_axes(self.dim(), axes))
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        let ord = self.order;
        self.layout.indices.iter().zip(self.coeffs.iter().copied()).filter(move |(k, _)| k.order() <= ord)
    }

    fn check_compatible(&self, o: &Jet) -> Result<()> {
        if self.dim() != o.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: o.dim() });
        }
        if self.base != o.base {
            return Err(Error::BasePointMismatch);
        }
        Ok(())
    }

    fn with_coeffs(&self, coeffs: Vec<f64>, order: u32) -> Jet {
        let mut j = Jet { layout: self.layout.clone(), base: self.base.clone(), coeffs, order };
        j.clear_above_order();
        j
    }

    fn clear_above_order(&mut self) {
        for (c, k) in self.coeffs.iter_mut().zip(&self.layout.indices) {
            if k.order() > self.order {
                *c = 0.0;
            }
        }
    }

    pub fn add(&self, o: &Jet) -> Result<Jet> {
        self.check_compatible(o)?;
        let c = self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a + b).collect();
        Ok(self.with_coeffs(c, self.order.min(o.order)))
    }

    pub fn sub(&self, o: &Jet) -> Result<Jet> {
        self.add(&o.scale(-1.0))
    }

    pub fn mul(&self, o: &Jet) -> Result<Jet> {
        self.check_compatible(o)?;
        let mut c = vec![0.0; self.coeffs.len()];
        for &(i, j, k) in &self.layout.products {
            c[k] += self.coeffs[i] * o.coeffs[j];
        }
        Ok(self.with_coeffs(c, self.order.min(o.order)))
    }

    pub fn scale(&self, k: f64) -> Jet {
        self.with_coeffs(self.coeffs.iter().map(|c| c * k).collect(), self.order)
    }

    pub fn add_scalar(&self, k: f64) -> Jet {
        let mut j = self.clone();
        j.coeffs[0] += k;
        j
    }

    /// `d f / d x_axis`, valid to one order less.
    pub fn partial(&self, axis: usize) -> Jet {
        let mut c = vec![0.0; self.coeffs.len()];
        for (i, k) in self.layout.indices.iter().enumerate() {
            if let Some(up) = self.layout.shift[i][axis] {
                c[i] = (k.0[axis] + 1) as f64 * self.coeffs[up];
            }
        }
        self.with_coeffs(c, self.order.saturating_sub(1))
    }

    /// Composition `g(f)` from the scalar derivatives `g^(k)(f(x0)) / k!`, k = 0..=4.
    fn compose(&self, taylor: [f64; 5]) -> Jet {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut acc = Jet::constant(self.dim(), &self.base, taylor[0]);
        acc.order = self.order;
        let mut hp = Jet::constant(self.dim(), &self.base, 1.0);
        for t in taylor.iter().skip(1) {
            hp = hp.mul(&h).expect("same layout");
            for (a, b) in acc.coeffs.iter_mut().zip(&hp.coeffs) {
                *a += t * b;
            }
        }
        acc.clear_above_order();
        acc
    }

    /// `f^e`. The value must be positive unless `e` is a nonnegative integer.
    pub fn powf(&self, e: f64) -> Result<Jet> {
        let c = self.value();
        let integral = e >= 0.0 && e.fract() == 0.0;
        if c <= 0.0 && !integral {
            return Err(Error::Domain { value: c, point: self.base.clone() });
        }
        let mut t = [0.0; 5];
        let mut binom = 1.0;
        for (k, slot) in t.iter_mut().enumerate() {
            if k > 0 {
                binom *= (e - (k as f64 - 1.0)) / k as f64;
            }
            let p = e - k as f64;
            *slot = if binom == 0.0 { 0.0 } else { binom * c.powf(p) };
        }
        Ok(self.compose(t))
    }

    pub fn exp(&self) -> Jet {
        let c = self.value().exp();
        self.compose([c, c, c / 2.0, c / 6.0, c / 24.0])
    }

    pub fn ln(&self) -> Result<Jet> {
        let c = self.value();
        if c <= 0.0 {
            return Err(Error::Domain { value: c, point: self.base.clone() });
        }
        Ok(self.compose([c.ln(), 1.0 / c, -0.5 / (c * c), 1.0 / (3.0 * c * c * c), -0.25 / (c * c * c * c)]))
    }
}

/// Taylor table of `p` at `x0`. The expansion is carried out exactly in
/// rational arithmetic before conversion to floating point.
pub fn jet_from_poly(p: &Poly, x0: &[f64]) -> Result<Jet> {
    if x0.len() != p.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: x0.len() });
    }
    let xq: Vec<Q> = x0.iter().map(|&v| q_from_f64_exact(v)).collect();
    let shifted = p.shift(&xq)?.truncate(JET_ORDER);
    let s = p.field().s_f64();
    let mut j = Jet::zero(p.dim(), x0);
    for (k, v) in shifted.terms() {
        j.set_coeff(k, v.to_f64(s));
    }
    Ok(j)
}

fn q_from_f64_exact(v: f64) -> Q {
    if v == 0.0 {
        return Q::zero();
    }
    let r = q_from_f64(v);
    // keep exactness: fall back to the binary expansion when the convergent is not bit-identical
    if super::number::q_to_f64(&r) == v {
        r
    } else {
        Q::from_float(v).expect("finite")
    }
}

pub fn jet_combine(a: &Jet, op: Combine<'_>) -> Result<Jet> {
    match op {
        Combine::Add(b) => a.add(b),
        Combine::Mul(b) => a.mul(b),
        Combine::Scale(k) => Ok(a.scale(k)),
    }
}

pub fn jet_power(a: &Jet, e: f64) -> Result<Jet> {
    a.powf(e)
}

pub fn jet_exp(a: &Jet) -> Jet {
    a.exp()
}
