//! Checks of the three local conditions on a family polynomial `w`:
//! the Hessian pattern at the origin, negative definiteness on a punctured
//! ball, and positivity of the origin rate.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::construction::{origin_rate, origin_rate_sign, ConstructionParams, Family, RateBreakdown};
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::linalg::{gershgorin_upper, is_negative_definite, jacobi_eigenvalues, leading_minors, ZExt, ZExtRing};
use crate::polyjet::number::{q, q_from_f64, q_to_f64, Q};
use crate::polyjet::oracle::{rel_close, w11_rate_oracle};
use crate::polyjet::{jet_from_poly, Ext, MultiIndex, Poly};
use crate::sampling::punctured_ball_samples;

/// Dead band below which a nonpositive top eigenvalue counts as zero.
pub const EIGEN_DEAD_BAND: f64 = 1e-10;
/// Relative tolerance between the closed-form origin rate and the jet oracle.
pub const RATE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    NegativeDefinite,
    NegativeSemidefinite,
    Indefinite,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::NegativeDefinite => "negative_definite",
            Verdict::NegativeSemidefinite => "negative_semidefinite",
            Verdict::Indefinite => "indefinite",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HessianReport {
    pub point: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
    /// Leading principal minors, `j = 1..=n`.
    pub minors: Vec<f64>,
    pub max_eigenvalue: f64,
    pub gershgorin_bound: f64,
    pub verdict: Verdict,
}

impl HessianReport {
    fn from_exact(point: &[f64], h: &[Vec<Ext>], w: &Poly) -> HessianReport {
        let field = w.field();
        let hessian: Vec<Vec<f64>> = h.iter().map(|r| r.iter().map(|v| field.to_f64(v)).collect()).collect();
        let minors_exact = leading_minors(h, field);
        let max_eigenvalue = jacobi_eigenvalues(&hessian).last().copied().unwrap_or(0.0);
        let verdict = if is_negative_definite(&minors_exact, field) {
            Verdict::NegativeDefinite
        } else if max_eigenvalue <= EIGEN_DEAD_BAND {
            Verdict::NegativeSemidefinite
        } else {
            Verdict::Indefinite
        };
        HessianReport {
            point: point.to_vec(),
            gershgorin_bound: gershgorin_upper(&hessian),
            minors: minors_exact.iter().map(|m| field.to_f64(m)).collect(),
            hessian,
            max_eigenvalue,
            verdict,
        }
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.push("point", fmt_vec(&self.point));
        for (i, row) in self.hessian.iter().enumerate() {
            kv.push(format!("hessian.{i}"), fmt_vec(row));
        }
        kv.push("minors", fmt_vec(&self.minors));
        kv.push_f64("max_eigenvalue", self.max_eigenvalue);
        kv.push_f64("gershgorin_bound", self.gershgorin_bound);
        kv.push("verdict", self.verdict);
        kv
    }
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

/// Second partials of `w` as polynomials, symmetric.
pub fn hessian_polys(w: &Poly) -> Vec<Vec<Poly>> {
    let n = w.dim();
    let mut h = vec![vec![Poly::zero(n, w.field().clone()); n]; n];
    for i in 0..n {
        for j in i..n {
            let p = w.partial(&[i, j]);
            h[j][i] = p.clone();
            h[i][j] = p;
        }
    }
    h
}

fn exact_point(x: &[f64]) -> Vec<Q> {
    x.iter().map(|&v| Q::from_float(v).expect("finite coordinate")).collect()
}

fn eval_hessian(h: &[Vec<Poly>], x: &[Q]) -> Vec<Vec<Ext>> {
    let n = h.len();
    let mut out = vec![vec![Ext::zero(); n]; n];
    for i in 0..n {
        for j in i..n {
            let v = h[i][j].eval(x).expect("dimension checked");
            out[j][i] = v.clone();
            out[i][j] = v;
        }
    }
    out
}

/// Hessian of `w` rescaled to integer arithmetic over `Z[t]`, `t = sqrt(t2)`.
///
/// With `s2 = p/r` in lowest terms, `t = r s` satisfies `t^2 = p r`. Every
/// entry is multiplied by `D r 2^(E dmax)`, where `D` clears the coefficient
/// denominators, `E` the dyadic denominators of the point and `dmax` is the
/// top degree, so minors keep their signs and scale by a known positive factor.
struct IntHessian {
    ring: ZExtRing,
    dmax: u32,
    // scale factor D r
    base_scale: BigInt,
    entries: Vec<Vec<Vec<(Vec<u32>, BigInt, BigInt)>>>,
}

impl IntHessian {
    fn new(h: &[Vec<Poly>]) -> IntHessian {
        let field = h[0][0].field().clone();
        let (p, r) = match &field.s2 {
            Some(s2) => (s2.numer().clone(), s2.denom().clone()),
            None => (BigInt::zero(), BigInt::one()),
        };
        let mut d = BigInt::one();
        let mut dmax = 0;
        for row in h {
            for e in row {
                for (k, v) in e.terms() {
                    d = d.lcm(v.a.denom()).lcm(v.b.denom());
                    dmax = dmax.max(k.order());
                }
            }
        }
        let dq = Q::from_integer(d.clone());
        let rq = Q::from_integer(r.clone());
        let entries = h
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| {
                        e.terms()
                            .map(|(k, v)| {
                                let a = (&v.a * &dq * &rq).to_integer();
                                let b = (&v.b * &dq).to_integer();
                                (k.0.clone(), a, b)
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        IntHessian { ring: ZExtRing { t2: &p * &r }, dmax, base_scale: d * r, entries }
    }

    /// Scaled Hessian at `x` and the exponent `E` of the dyadic scaling.
    fn eval(&self, x: &[f64]) -> (Vec<Vec<ZExt>>, u64) {
        let xq: Vec<Q> = exact_point(x);
        let e = xq.iter().map(|v| v.denom().bits() - 1).max().unwrap_or(0);
        let xi: Vec<BigInt> = xq.iter().map(|v| v.numer() << (e - (v.denom().bits() - 1))).collect();
        let n = x.len();
        let mut out = vec![vec![ZExt::default(); n]; n];
        for i in 0..n {
            for j in i..n {
                let mut acc = ZExt::default();
                for (k, a, b) in &self.entries[i][j] {
                    let mut mono = BigInt::one();
                    let mut deg = 0;
                    for (xv, &p) in xi.iter().zip(k) {
                        for _ in 0..p {
                            mono *= xv;
                        }
                        deg += p;
                    }
                    mono <<= (e * u64::from(self.dmax - deg)) as usize;
                    acc.a += a * &mono;
                    acc.b += b * &mono;
                }
                out[j][i] = acc.clone();
                out[i][j] = acc;
            }
        }
        (out, e)
    }

    /// Value of a scaled `j`-th minor in original units.
    fn unscale(&self, m: &ZExt, j: usize, e: u64) -> f64 {
        let den = num_traits::pow(self.base_scale.clone(), j);
        let t = q_to_f64(&Q::from_integer(self.ring.t2.clone())).sqrt();
        let a = q_to_f64(&Ratio::new_raw(m.a.clone(), den.clone()));
        let b = q_to_f64(&Ratio::new_raw(m.b.clone(), den));
        (a + b * t) * 2f64.powi(-((e * u64::from(self.dmax)) as i32 * j as i32))
    }
}

/// Exact Hessian report of `w` at `x` (coordinates taken as exact binary values).
pub fn hessian_report(w: &Poly, x: &[f64]) -> Result<HessianReport> {
    if x.len() != w.dim() {
        return Err(Error::DimensionMismatch { expected: w.dim(), got: x.len() });
    }
    let h = hessian_polys(w);
    Ok(HessianReport::from_exact(x, &eval_hessian(&h, &exact_point(x)), w))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Condition1 {
    pub pass: bool,
    pub report: HessianReport,
}

/// `w_ii(0) < 0` for `i >= 2`, every other second partial exactly zero at the origin.
pub fn check_condition1(w: &Poly) -> Condition1 {
    let n = w.dim();
    let zero = vec![Q::from_integer(0.into()); n];
    let h = eval_hessian(&hessian_polys(w), &zero);
    let field = w.field();
    let pass = (0..n).all(|i| {
        (0..n).all(|j| if i == j && i > 0 { field.sign(&h[i][j]) == Ordering::Less } else { h[i][j].is_zero() })
    });
    Condition1 { pass, report: HessianReport::from_exact(&vec![0.0; n], &h, w) }
}

/// Size of the deterministic sample set for the punctured-ball check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleSpec {
    pub count: usize,
    /// Number of halvings towards the origin for the near-origin copies.
    pub scales: u32,
    /// Start offset into the Halton sequence.
    pub offset: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec { count: 10_000, scales: 8, offset: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Condition2 {
    pub pass: bool,
    pub rho: f64,
    pub samples: usize,
    /// Minimum over samples and `j` of `|minor_j| / |x|^2`.
    pub margin: f64,
    /// First failing sample in sample order.
    pub failing: Option<HessianReport>,
}

/// Strict Sylvester pattern for `D^2 w` at every sample of the punctured closed ball.
pub fn check_condition2(w: &Poly, rho: f64, spec: &SampleSpec) -> Result<Condition2> {
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!("rho = {rho} must be positive")));
    }
    let n = w.dim();
    let h = hessian_polys(w);
    let pts = punctured_ball_samples(n, rho, spec.count, spec.scales, spec.offset);
    let ih = IntHessian::new(&h);
    let results: Vec<(bool, f64)> = pts
        .par_iter()
        .map(|x| {
            let (hx, e) = ih.eval(x);
            let r2: f64 = x.iter().map(|v| v * v).sum();
            let minors = leading_minors(&hx, &ih.ring);
            let ok = is_negative_definite(&minors, &ih.ring);
            let ratio = minors
                .iter()
                .enumerate()
                .map(|(j, m)| ih.unscale(m, j + 1, e).abs() / r2)
                .fold(f64::INFINITY, f64::min);
            (ok, ratio)
        })
        .collect();
    let mut margin = f64::INFINITY;
    let mut failing = None;
    for (x, &(ok, ratio)) in pts.iter().zip(&results) {
        margin = margin.min(ratio);
        if !ok && failing.is_none() {
            failing = Some(HessianReport::from_exact(x, &eval_hessian(&h, &exact_point(x)), w));
        }
    }
    Ok(Condition2 { pass: failing.is_none(), rho, samples: pts.len(), margin, failing })
}

pub const RHO_START: f64 = 0.5;
pub const RHO_HALVINGS: u32 = 30;

#[derive(Clone, Debug, PartialEq)]
pub struct RhoSearch {
    pub rho: f64,
    pub result: Condition2,
    /// `(rho, pass)` for every radius tried.
    pub trajectory: Vec<(f64, bool)>,
}

/// Halves `rho` from 1/2 until the punctured-ball check passes.
pub fn rho_search(w: &Poly, spec: &SampleSpec) -> Result<RhoSearch> {
    let mut rho = RHO_START;
    let mut trajectory = Vec::new();
    for _ in 0..=RHO_HALVINGS {
        let c = check_condition2(w, rho, spec)?;
        trajectory.push((rho, c.pass));
        if c.pass {
            return Ok(RhoSearch { rho, result: c, trajectory });
        }
        rho /= 2.0;
    }
    Err(Error::ConstructionInvalid(format!(
        "no radius in [{rho}, {RHO_START}] makes the Hessian negative definite off the origin"
    )))
}

/// Exact determinant of a small polynomial matrix by cofactor expansion.
pub fn poly_det(a: &[Vec<Poly>]) -> Poly {
    let n = a.len();
    if n == 1 {
        return a[0][0].clone();
    }
    let mut acc = Poly::zero(a[0][0].dim(), a[0][0].field().clone());
    for c in 0..n {
        if a[0][c].is_zero() {
            continue;
        }
        let sub: Vec<Vec<Poly>> = a[1..]
            .iter()
            .map(|r| r.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, p)| p.clone()).collect())
            .collect();
        let t = a[0][c].mul(&poly_det(&sub));
        acc = if c % 2 == 0 { acc.add(&t) } else { acc.sub(&t) };
    }
    acc
}

/// `det([D^2 w]_j)` as an exact polynomial.
pub fn leading_minor_poly(w: &Poly, j: usize) -> Result<Poly> {
    if j == 0 || j > w.dim() {
        return Err(Error::InvalidParameter(format!("minor order {j} not in 1..={}", w.dim())));
    }
    let h = hessian_polys(w);
    let block: Vec<Vec<Poly>> = h[..j].iter().map(|r| r[..j].to_vec()).collect();
    Ok(poly_det(&block))
}

/// Lowest-degree homogeneous part of `det([D^2 w]_j)`.
pub fn minor_leading_order(w: &Poly, j: usize) -> Result<Poly> {
    let d = leading_minor_poly(w, j)?;
    Ok(match d.min_degree() {
        Some(k) => d.homogeneous_part(k),
        None => d,
    })
}

/// The quadratic form expected as the leading part of the `j`-th minor:
/// case 1: `(-1)^j 2^j (6 x1^2 + 2 Σ_{i>=2} x_i^2 - Σ_{i=2..j} x_i^2)`;
/// case 2: `(-1)^j (2b^2)^(j-1) (x1^2/b^2 + 2 Σ_{i>=2} x_i^2 - 2(3/2-α) Σ_{i=2..j} x_i^2)`.
pub fn expected_leading_minor(params: &ConstructionParams, j: usize) -> Result<Poly> {
    let n = params.n;
    if j == 0 || j > n {
        return Err(Error::InvalidParameter(format!("minor order {j} not in 1..={n}")));
    }
    let sign = if j % 2 == 0 { q(1) } else { q(-1) };
    let sq = |i: usize| MultiIndex::from_axes(n, &[i, i]);
    let w = params.build()?;
    let mut p = Poly::zero(n, w.field().clone());
    match params.family {
        Family::Case1 => {
            let c = &sign * num_traits::pow(q(2), j);
            p.add_term(sq(0), Ext::from(&c * q(6)));
            for i in 1..n {
                let k = if i < j { q(1) } else { q(2) };
                p.add_term(sq(i), Ext::from(&c * k));
            }
        }
        Family::Case2 => {
            let b = q_from_f64(params.steepness);
            let b2 = &b * &b;
            let c = &sign * num_traits::pow(q(2) * &b2, j - 1);
            let s2 = crate::construction::case2_s2(params.alpha);
            p.add_term(sq(0), Ext::from(&c / &b2));
            for i in 1..n {
                let k = if i < j { q(2) - q(2) * &s2 } else { q(2) };
                p.add_term(sq(i), Ext::from(&c * k));
            }
        }
    }
    Ok(p)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Condition3 {
    pub pass: bool,
    pub breakdown: RateBreakdown,
    pub oracle: f64,
}

/// Positivity of the origin rate, cross-checked between the closed form for
/// `params` and the jet oracle on `w`.
pub fn check_condition3(w: &Poly, params: &ConstructionParams) -> Result<Condition3> {
    let breakdown = origin_rate(params)?;
    let jet = jet_from_poly(w, &vec![0.0; w.dim()])?;
    let oracle = w11_rate_oracle(&jet, params.alpha, params.m)?;
    let scale: f64 = breakdown.terms.iter().map(|t| t.value.abs()).sum();
    if !rel_close(breakdown.total, oracle, RATE_TOL, scale) {
        return Err(Error::InternalInconsistency { closed_form: breakdown.total, oracle });
    }
    let pass = origin_rate_sign(params)? == Ordering::Greater && oracle > 0.0;
    Ok(Condition3 { pass, breakdown, oracle })
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub params: ConstructionParams,
    pub condition1: Condition1,
    pub condition2: Condition2,
    pub rho_trajectory: Vec<(f64, bool)>,
    pub condition3: Condition3,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.condition1.pass && self.condition2.pass && self.condition3.pass
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.extend("params.", &self.params.to_kv());
        kv.push("condition1.pass", self.condition1.pass);
        kv.extend("condition1.origin.", &self.condition1.report.to_kv());
        kv.push("condition2.pass", self.condition2.pass);
        kv.push_f64("condition2.rho", self.condition2.rho);
        kv.push("condition2.samples", self.condition2.samples);
        kv.push_f64("condition2.margin", self.condition2.margin);
        let traj: Vec<String> = self.rho_trajectory.iter().map(|(r, p)| format!("{r:?}:{p}")).collect();
        kv.push("condition2.trajectory", traj.join(","));
        if let Some(f) = &self.condition2.failing {
            kv.extend("condition2.failing.", &f.to_kv());
        }
        kv.push("condition3.pass", self.condition3.pass);
        kv.push_f64("condition3.oracle", self.condition3.oracle);
        kv.extend("condition3.rate.", &self.condition3.breakdown.to_kv());
        kv.push("all_pass", self.all_pass());
        kv
    }
}

/// Runs all three checks. With `rho` given, condition 2 is checked at that
/// radius only; otherwise the halving search picks it.
pub fn verify(
    w: &Poly,
    params: &ConstructionParams,
    rho: Option<f64>,
    spec: &SampleSpec,
) -> Result<VerificationReport> {
    let condition1 = check_condition1(w);
    let (condition2, rho_trajectory) = match rho {
        Some(r) => {
            let c = check_condition2(w, r, spec)?;
            let t = vec![(r, c.pass)];
            (c, t)
        }
        None => match rho_search(w, spec) {
            Ok(s) => (s.result, s.trajectory),
            Err(Error::ConstructionInvalid(_)) => {
                let r = RHO_START / 2f64.powi(RHO_HALVINGS as i32);
                let c = check_condition2(w, r, spec)?;
                (c, vec![(r, false)])
            }
            Err(e) => return Err(e),
        },
    };
    let condition3 = check_condition3(w, params)?;
    let mut params = params.clone();
    params.rho = condition2.rho;
    Ok(VerificationReport { params, condition1, condition2, rho_trajectory, condition3 })
}
