//! The two polynomial families whose Hessian is degenerate at the origin
//! while `∂t w_11` is positive there, and their closed-form origin rates.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::polyjet::number::{q, q_from_f64, q_to_f64, qr, Ext, ExtField, Q};
use crate::polyjet::oracle::RateTerm;
use crate::polyjet::{jet_from_poly, Jet, MultiIndex, Poly};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    /// `alpha ∈ [0, 1/2) ∪ {1}`, steepness `a`.
    Case1,
    /// `alpha ∈ (1/2, 1)`, steepness `b`.
    Case2,
}

impl Family {
    pub fn for_alpha(alpha: f64) -> Result<Family> {
        if alpha == 0.5 {
            return Err(Error::FamilyRange { alpha, what: "any family (alpha = 1/2 is excluded)" });
        }
        if alpha == 1.0 || (0.0..0.5).contains(&alpha) {
            Ok(Family::Case1)
        } else if alpha > 0.5 && alpha < 1.0 {
            Ok(Family::Case2)
        } else {
            Err(Error::FamilyRange { alpha, what: "[0, 1] minus {1/2}" })
        }
    }

    pub fn admits(self, alpha: f64) -> bool {
        Family::for_alpha(alpha).map_or(false, |f| f == self)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Case1 => "case1",
            Family::Case2 => "case2",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Family> {
        match s {
            "case1" => Ok(Family::Case1),
            "case2" => Ok(Family::Case2),
            _ => Err(Error::InvalidParameter(format!("unknown family '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstructionParams {
    pub alpha: f64,
    pub m: f64,
    pub n: usize,
    pub family: Family,
    /// `a` for case 1, `b` for case 2.
    pub steepness: f64,
    /// Ball radius; set once verification has found one.
    pub rho: f64,
    /// Amplitude of the radial profile; set by assembly.
    pub amplitude: f64,
}

impl ConstructionParams {
    pub fn new(alpha: f64, m: f64, n: usize, steepness: f64) -> Result<Self> {
        let p =
            ConstructionParams { alpha, m, n, family: Family::for_alpha(alpha)?, steepness, rho: 0.5, amplitude: 1.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.family.admits(self.alpha) {
            return Err(Error::FamilyRange { alpha: self.alpha, what: "the selected family" });
        }
        if !(self.m > 1.0) || !self.m.is_finite() {
            return Err(Error::InvalidParameter(format!("m = {} must exceed 1", self.m)));
        }
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("n = {} must be at least 2", self.n)));
        }
        for (name, v) in [("steepness", self.steepness), ("rho", self.rho), ("amplitude", self.amplitude)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Poly> {
        match self.family {
            Family::Case1 => build_case1(self.alpha, self.n, self.steepness),
            Family::Case2 => build_case2(self.alpha, self.n, self.steepness),
        }
    }

    /// Jet of the family polynomial at the origin.
    pub fn origin_jet(&self) -> Result<Jet> {
        jet_from_poly(&self.build()?, &vec![0.0; self.n])
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.push_f64("alpha", self.alpha)
            .push_f64("m", self.m)
            .push("n", self.n)
            .push("family", self.family)
            .push_f64("steepness", self.steepness)
            .push_f64("rho", self.rho)
            .push_f64("amplitude", self.amplitude);
        kv
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let p = ConstructionParams {
            alpha: kv.f64("alpha")?,
            m: kv.f64("m")?,
            n: kv.usize("n")?,
            family: kv.require("family")?.parse()?,
            steepness: kv.f64("steepness")?,
            rho: kv.f64("rho")?,
            amplitude: kv.f64("amplitude")?,
        };
        p.validate()?;
        Ok(p)
    }
}

fn var_index(n: usize, pairs: &[(usize, u32)]) -> MultiIndex {
    let mut e = vec![0; n];
    for &(i, k) in pairs {
        e[i] += k;
    }
    MultiIndex(e)
}

/// `1 + a x1 - x1^4 + Σ_{i>=2} (x1 x_i^2 - x_i^2 - 2 x1^2 x_i^2)`.
pub fn build_case1(alpha: f64, n: usize, a: f64) -> Result<Poly> {
    if !Family::Case1.admits(alpha) {
        return Err(Error::FamilyRange { alpha, what: "case 1 ([0, 1/2) or 1)" });
    }
    check_shape(n, a)?;
    let mut p = Poly::zero(n, ExtField::rational());
    p.add_term(MultiIndex::zero(n), Ext::one());
    p.add_term(var_index(n, &[(0, 1)]), Ext::from(q_from_f64(a)));
    p.add_term(var_index(n, &[(0, 4)]), Ext::int(-1));
    for i in 1..n {
        p.add_term(var_index(n, &[(0, 1), (i, 2)]), Ext::int(1));
        p.add_term(var_index(n, &[(i, 2)]), Ext::int(-1));
        p.add_term(var_index(n, &[(0, 2), (i, 2)]), Ext::int(-2));
    }
    Ok(p)
}

/// Exact `s^2 = 3/2 - alpha`.
pub fn case2_s2(alpha: f64) -> Q {
    qr(3, 2) - q_from_f64(alpha)
}

/// `1 + α s/(b(1-α)) x1 - x1^4/(12 b^2) + Σ_{i>=2} (-b^2 x_i^2 + b s x1 x_i^2 - x1^2 x_i^2)`
/// with `s = (3/2 - α)^(1/2)` kept symbolic.
pub fn build_case2(alpha: f64, n: usize, b: f64) -> Result<Poly> {
    if !Family::Case2.admits(alpha) {
        return Err(Error::FamilyRange { alpha, what: "case 2 ((1/2, 1))" });
    }
    check_shape(n, b)?;
    let aq = q_from_f64(alpha);
    let bq = q_from_f64(b);
    let b2 = &bq * &bq;
    let mut p = Poly::zero(n, ExtField::with_s2(case2_s2(alpha)));
    p.add_term(MultiIndex::zero(n), Ext::one());
    let lin = &aq / (&bq * (Q::one() - &aq));
    p.add_term(var_index(n, &[(0, 1)]), Ext::new(Q::zero(), lin));
    p.add_term(var_index(n, &[(0, 4)]), Ext::from(-(q(12) * &b2).recip()));
    for i in 1..n {
        p.add_term(var_index(n, &[(i, 2)]), Ext::from(-b2.clone()));
        p.add_term(var_index(n, &[(0, 1), (i, 2)]), Ext::new(Q::zero(), bq.clone()));
        p.add_term(var_index(n, &[(0, 2), (i, 2)]), Ext::int(-1));
    }
    Ok(p)
}

fn check_shape(n: usize, steep: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n = {n} must be at least 2")));
    }
    if !(steep > 0.0) || !steep.is_finite() {
        return Err(Error::InvalidParameter(format!("steepness {steep} must be positive")));
    }
    Ok(())
}

/// Closed-form origin rate with its summands.
#[derive(Clone, Debug, PartialEq)]
pub struct RateBreakdown {
    pub total: f64,
    pub terms: Vec<RateTerm>,
    /// `C_{alpha,m}`; zero for case 1.
    pub c_alpha_m: f64,
}

impl RateBreakdown {
    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.push_f64("total", self.total);
        kv.push_f64("c_alpha_m", self.c_alpha_m);
        kv.push("terms", self.terms.len());
        for (i, t) in self.terms.iter().enumerate() {
            kv.push(format!("term.{i}.name"), t.name);
            kv.push_f64(format!("term.{i}.value"), t.value);
        }
        kv
    }
}

/// Exact summands of the closed-form origin rate. For `alpha = 0` these omit
/// the positive factor `e^{w(0)} = e`, which [`origin_rate`] applies.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactRate {
    pub terms: Vec<(&'static str, Q)>,
    pub c_alpha_m: Option<Q>,
}

impl ExactRate {
    pub fn total(&self) -> Q {
        self.terms.iter().fold(Q::zero(), |acc, (_, v)| acc + v)
    }
}

pub fn origin_rate_exact(p: &ConstructionParams) -> Result<ExactRate> {
    p.validate()?;
    let alpha = q_from_f64(p.alpha);
    let m = q_from_f64(p.m);
    let n1 = q(p.n as i64 - 1);
    let m1 = &m - Q::one();
    let st = q_from_f64(p.steepness);
    match p.family {
        Family::Case1 => {
            let a = st;
            let first = -(q(24) + q(8) * &n1) * &m1;
            if alpha.is_zero() {
                return Ok(ExactRate {
                    terms: vec![
                        ("-(24+8(n-1))(m-1)", first),
                        ("4(m-1)(n-1)a", q(4) * &m1 * &n1 * &a),
                        ("-2(m-1)(n-1)a^2", -q(2) * &m1 * &n1 * &a * &a),
                        ("m a^4", &m * a.pow(4)),
                    ],
                    c_alpha_m: None,
                });
            }
            let inv = alpha.recip();
            let k = &inv * (Q::one() + &m1 * (Q::one() - &alpha));
            Ok(ExactRate {
                terms: vec![
                    ("-(24+8(n-1))(m-1)", first),
                    ("4(m-1)/alpha a(n-1)", q(4) * &m1 * &inv * &a * &n1),
                    ("-2(m-1)/alpha (1/alpha-1) a^2(n-1)", -q(2) * &m1 * &inv * (&inv - Q::one()) * &a * &a * &n1),
                    (
                        "(1/alpha)(1+(m-1)(1-alpha))(1/alpha-1)(1/alpha-2) a^4",
                        &k * (&inv - Q::one()) * (&inv - q(2)) * a.pow(4),
                    ),
                ],
                c_alpha_m: None,
            })
        }
        Family::Case2 => {
            let b = st;
            let c = c_alpha_m_exact(&alpha, &m);
            let one_m_a = Q::one() - &alpha;
            Ok(ExactRate {
                terms: vec![
                    ("-2(m-1)/b^2", -q(2) * &m1 / (&b * &b)),
                    ("-C/b^4", -&c / b.pow(4)),
                    ("(m-1)(n-1)(2alpha-1)/(1-alpha)", &m1 * &n1 * (q(2) * &alpha - Q::one()) / one_m_a),
                ],
                c_alpha_m: Some(c),
            })
        }
    }
}

/// `C_{α,m} = -(1/α)(1+(m-1)(1-α))(1/α-2)(1/α-1) α^4 s^4 / (1-α)^4`, `s^2 = 3/2 - α`.
pub fn c_alpha_m_exact(alpha: &Q, m: &Q) -> Q {
    let inv = alpha.recip();
    let one = Q::one();
    let k = &inv * (&one + (m - &one) * (&one - alpha));
    let s2 = qr(3, 2) - alpha;
    let base = alpha * alpha * &s2 / ((&one - alpha) * (&one - alpha));
    -(k * (&inv - q(2)) * (&inv - &one) * &base * &base)
}

pub fn c_alpha_m(alpha: f64, m: f64) -> f64 {
    q_to_f64(&c_alpha_m_exact(&q_from_f64(alpha), &q_from_f64(m)))
}

/// Closed-form `∂t w_11` at the origin for the family polynomial (value 1 there).
pub fn origin_rate(p: &ConstructionParams) -> Result<RateBreakdown> {
    let exact = origin_rate_exact(p)?;
    let prefactor = if p.alpha == 0.0 { std::f64::consts::E } else { 1.0 };
    let terms: Vec<RateTerm> =
        exact.terms.iter().map(|(name, v)| RateTerm { name, value: prefactor * q_to_f64(v) }).collect();
    Ok(RateBreakdown {
        total: terms.iter().map(|t| t.value).sum(),
        terms,
        c_alpha_m: exact.c_alpha_m.as_ref().map_or(0.0, q_to_f64),
    })
}

/// The case-2 origin rate obtained by direct substitution into the nine-term
/// expansion, before simplification (five surviving summands).
pub fn case2_raw_terms(alpha: f64, m: f64, n: usize, b: f64) -> [f64; 5] {
    let n1 = n as f64 - 1.0;
    let s2 = 1.5 - alpha;
    let k = (1.0 + (m - 1.0) * (1.0 - alpha)) / alpha;
    let w1sq = alpha * alpha * s2 / (b * b * (1.0 - alpha) * (1.0 - alpha));
    [
        (m - 1.0) * (-2.0 / (b * b)),
        (m - 1.0) * (-4.0 * n1),
        2.0 * (m - 1.0) / alpha * (alpha * s2 / (1.0 - alpha)) * 2.0 * n1,
        (m - 1.0) / alpha * (1.0 / alpha - 1.0) * (alpha * alpha * s2 / ((1.0 - alpha) * (1.0 - alpha))) * (-2.0 * n1),
        k * (1.0 / alpha - 2.0) * (1.0 / alpha - 1.0) * w1sq * w1sq,
    ]
}

/// Three-term simplified case-2 origin rate.
pub fn case2_simplified_terms(alpha: f64, m: f64, n: usize, b: f64) -> [f64; 3] {
    [
        -2.0 * (m - 1.0) / (b * b),
        -c_alpha_m(alpha, m) / b.powi(4),
        (m - 1.0) * (n as f64 - 1.0) * (2.0 * alpha - 1.0) / (1.0 - alpha),
    ]
}

/// Step count of the steepness search.
pub const STEEPNESS_STEPS: usize = 500;

/// `k`-th steepness grid value: `0.1 * 1.05^k` rounded to a multiple of 1/1024
/// so that it is an exact dyadic rational.
pub fn steepness_grid(k: usize) -> f64 {
    (0.1 * 1.05f64.powi(k as i32) * 1024.0).round() / 1024.0
}

/// Smallest grid steepness whose origin rate is at least `margin` times the
/// magnitude of the leading negative summand, and which stays positive when doubled.
pub fn solve_steepness(alpha: f64, m: f64, n: usize, margin: f64) -> Result<f64> {
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::InvalidParameter(format!("margin {margin} not in (0, 1)")));
    }
    let mut params = ConstructionParams::new(alpha, m, n, 1.0)?;
    for k in 0..STEEPNESS_STEPS {
        params.steepness = steepness_grid(k);
        let r = origin_rate(&params)?;
        let lead = r.terms[0].value.abs();
        if r.total >= margin * lead {
            let mut doubled = params.clone();
            doubled.steepness *= 2.0;
            if origin_rate(&doubled)?.total > 0.0 {
                return Ok(params.steepness);
            }
        }
    }
    Err(Error::SearchExhausted { alpha, m, n, steps: STEEPNESS_STEPS })
}

/// Exact sign of the closed-form origin rate.
pub fn origin_rate_sign(p: &ConstructionParams) -> Result<std::cmp::Ordering> {
    let t = origin_rate_exact(p)?.total();
    Ok(if t.is_positive() {
        std::cmp::Ordering::Greater
    } else if t.is_negative() {
        std::cmp::Ordering::Less
    } else {
        std::cmp::Ordering::Equal
    })
}
