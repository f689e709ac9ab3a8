//! Time derivative of `w_11` for `w = v^alpha` under the pressure equation
//! `v_t = (m-1) v Δv + |∇v|²`.
//!
//! [`w11_rate_oracle`] derives the rate by pushing jets through the chain rule.
//! [`expanded_rate_terms`] and [`log_reference_terms`] evaluate the closed-form expansions
//! summand by summand so they can be checked against the oracle.

use super::jet::Jet;
use crate::error::{Error, Result};

/// One named summand of a closed-form rate expansion.
#[derive(Clone, Debug, PartialEq)]
pub struct RateTerm {
    pub name: &'static str,
    pub value: f64,
}

pub fn sum_terms(terms: &[RateTerm]) -> f64 {
    terms.iter().map(|t| t.value).sum()
}

/// `∂t w_11` at the jet's base point, computed without any closed form.
///
/// For `alpha > 0`: `v = w^(1/alpha)`, `w_t = alpha v^(alpha-1) v_t`.
/// For `alpha == 0`: `v = e^w`, `w_t = v_t / v`.
pub fn w11_rate_oracle(w: &Jet, alpha: f64, m: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} not in [0, 1]")));
    }
    if m <= 1.0 {
        return Err(Error::InvalidParameter(format!("m = {m} must exceed 1")));
    }
    let v = if alpha == 0.0 { w.exp() } else { w.powf(1.0 / alpha)? };
    let vt = pressure_rhs(&v, m)?;
    let wt = if alpha == 0.0 {
        vt.mul(&w.scale(-1.0).exp())?
    } else {
        vt.mul(&w.powf((alpha - 1.0) / alpha)?)?.scale(alpha)
    };
    Ok(wt.d(&[0, 0]))
}

/// `(m-1) v Δv + |∇v|²` as a jet (valid to order 2 for an order-4 input).
pub fn pressure_rhs(v: &Jet, m: f64) -> Result<Jet> {
    let n = v.dim();
    let grads: Vec<Jet> = (0..n).map(|k| v.partial(k)).collect();
    let mut lap = grads[0].partial(0);
    let mut grad_sq = grads[0].mul(&grads[0])?;
    for (k, g) in grads.iter().enumerate().skip(1) {
        lap = lap.add(&g.partial(k))?;
        grad_sq = grad_sq.add(&g.mul(g)?)?;
    }
    v.mul(&lap)?.scale(m - 1.0).add(&grad_sq)
}

/// Derivatives of `w` needed by the closed forms, with `k` summed over all axes.
#[derive(Clone, Debug)]
pub struct WSums {
    pub w: f64,
    pub w1: f64,
    pub w11: f64,
    pub sum_wkk: f64,
    pub sum_wkk1: f64,
    pub sum_wkk11: f64,
    pub sum_wk2: f64,
    pub sum_wk_wk1: f64,
    pub sum_w1k2: f64,
    pub sum_wk_wk11: f64,
}

impl WSums {
    pub fn from_jet(w: &Jet) -> WSums {
        let n = w.dim();
        let mut s = WSums {
            w: w.value(),
            w1: w.d(&[0]),
            w11: w.d(&[0, 0]),
            sum_wkk: 0.0,
            sum_wkk1: 0.0,
            sum_wkk11: 0.0,
            sum_wk2: 0.0,
            sum_wk_wk1: 0.0,
            sum_w1k2: 0.0,
            sum_wk_wk11: 0.0,
        };
        for k in 0..n {
            let wk = w.d(&[k]);
            let wk1 = w.d(&[k, 0]);
            s.sum_wkk += w.d(&[k, k]);
            s.sum_wkk1 += w.d(&[k, k, 0]);
            s.sum_wkk11 += w.d(&[k, k, 0, 0]);
            s.sum_wk2 += wk * wk;
            s.sum_wk_wk1 += wk * wk1;
            s.sum_w1k2 += wk1 * wk1;
            s.sum_wk_wk11 += wk * w.d(&[k, 0, 0]);
        }
        s
    }
}

/// Nine-summand closed form of `∂t w_11` for `alpha > 0`.
pub fn expanded_rate_terms(w: &Jet, alpha: f64, m: f64) -> Result<Vec<RateTerm>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("closed form needs alpha in (0, 1], got {alpha}")));
    }
    let s = WSums::from_jet(w);
    if s.w <= 0.0 {
        return Err(Error::Domain { value: s.w, point: w.base().to_vec() });
    }
    let b = 1.0 / alpha;
    let k = b * (1.0 + (m - 1.0) * (1.0 - alpha));
    let wp = |e: f64| s.w.powf(e);
    Ok(vec![
        RateTerm { name: "(m-1) w^b w_kk11", value: (m - 1.0) * wp(b) * s.sum_wkk11 },
        RateTerm { name: "2(m-1)/a w^(b-1) w_1 w_kk1", value: 2.0 * (m - 1.0) * b * wp(b - 1.0) * s.w1 * s.sum_wkk1 },
        RateTerm {
            name: "(m-1)/a (b-1) w^(b-2) w_1^2 w_kk",
            value: (m - 1.0) * b * (b - 1.0) * wp(b - 2.0) * s.w1 * s.w1 * s.sum_wkk,
        },
        RateTerm { name: "(m-1)/a w^(b-1) w_11 w_kk", value: (m - 1.0) * b * wp(b - 1.0) * s.w11 * s.sum_wkk },
        RateTerm {
            name: "K (b-2)(b-1) w^(b-3) w_1^2 w_k^2",
            value: k * (b - 2.0) * (b - 1.0) * wp(b - 3.0) * s.w1 * s.w1 * s.sum_wk2,
        },
        RateTerm { name: "K (b-1) w^(b-2) w_11 w_k^2", value: k * (b - 1.0) * wp(b - 2.0) * s.w11 * s.sum_wk2 },
        RateTerm {
            name: "K 4(b-1) w^(b-2) w_1 w_k w_k1",
            value: k * 4.0 * (b - 1.0) * wp(b - 2.0) * s.w1 * s.sum_wk_wk1,
        },
        RateTerm { name: "K 2 w^(b-1) w_1k^2", value: k * 2.0 * wp(b - 1.0) * s.sum_w1k2 },
        RateTerm { name: "K 2 w^(b-1) w_k w_k11", value: k * 2.0 * wp(b - 1.0) * s.sum_wk_wk11 },
    ])
}

/// Eight-summand reference form of the `alpha = 0` expansion, kept verbatim so
/// that [`log_expansion_audit`] can flag where it departs from the chain rule.
pub fn log_reference_terms(w: &Jet, m: f64) -> Vec<RateTerm> {
    let s = WSums::from_jet(w);
    let e = s.w.exp();
    vec![
        RateTerm { name: "(m-1) e^w w_kk11", value: (m - 1.0) * e * s.sum_wkk11 },
        RateTerm { name: "2(m-1) e^w w_1 w_kk1", value: 2.0 * (m - 1.0) * e * s.w1 * s.sum_wkk1 },
        RateTerm { name: "(m-1) e^w w_1^2 w_kk", value: (m - 1.0) * e * s.w1 * s.w1 * s.sum_wkk },
        RateTerm { name: "(m-1) e^w w_11 w_kk", value: (m - 1.0) * e * s.w11 * s.sum_wkk },
        RateTerm { name: "m e^w w_1^2 w_k^2", value: m * e * s.w1 * s.w1 * s.sum_wk2 },
        RateTerm { name: "m e^w w_1 w_k w_k1", value: m * e * s.w1 * s.sum_wk_wk1 },
        RateTerm { name: "2m e^w w_1k^2", value: 2.0 * m * e * s.sum_w1k2 },
        RateTerm { name: "2m e^w w_k w_k11", value: 2.0 * m * e * s.sum_wk_wk11 },
    ]
}

/// The `alpha = 0` expansion obtained from `w_t = e^w ((m-1) Δw + m |∇w|²)`.
pub fn log_chain_rule_terms(w: &Jet, m: f64) -> Vec<RateTerm> {
    let s = WSums::from_jet(w);
    let e = s.w.exp();
    vec![
        RateTerm { name: "(m-1) e^w w_kk11", value: (m - 1.0) * e * s.sum_wkk11 },
        RateTerm { name: "2(m-1) e^w w_1 w_kk1", value: 2.0 * (m - 1.0) * e * s.w1 * s.sum_wkk1 },
        RateTerm { name: "(m-1) e^w w_1^2 w_kk", value: (m - 1.0) * e * s.w1 * s.w1 * s.sum_wkk },
        RateTerm { name: "(m-1) e^w w_11 w_kk", value: (m - 1.0) * e * s.w11 * s.sum_wkk },
        RateTerm { name: "m e^w w_1^2 w_k^2", value: m * e * s.w1 * s.w1 * s.sum_wk2 },
        RateTerm { name: "m e^w w_1 w_k w_k1", value: 4.0 * m * e * s.w1 * s.sum_wk_wk1 },
        RateTerm { name: "2m e^w w_1k^2", value: 2.0 * m * e * s.sum_w1k2 },
        RateTerm { name: "2m e^w w_k w_k11", value: 2.0 * m * e * s.sum_wk_wk11 },
        RateTerm { name: "m e^w w_11 w_k^2", value: m * e * s.w11 * s.sum_wk2 },
    ]
}

/// Termwise difference between the reference expansion and the chain-rule one.
#[derive(Clone, Debug, PartialEq)]
pub struct TermDiff {
    pub name: &'static str,
    pub reference_value: f64,
    pub chain_rule: f64,
}

#[derive(Clone, Debug)]
pub struct LogExpansionAudit {
    pub oracle: f64,
    pub reference_total: f64,
    pub chain_rule_total: f64,
    /// Summands whose reference and chain-rule values differ beyond tolerance.
    pub flagged: Vec<TermDiff>,
}

/// Compares the reference `alpha = 0` expansion with the chain-rule one and the jet oracle.
pub fn log_expansion_audit(w: &Jet, m: f64, rel_tol: f64) -> Result<LogExpansionAudit> {
    let reference = log_reference_terms(w, m);
    let chain = log_chain_rule_terms(w, m);
    let scale: f64 = chain.iter().map(|t| t.value.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut flagged = Vec::new();
    for c in &chain {
        let p = reference.iter().find(|t| t.name == c.name).map_or(0.0, |t| t.value);
        if (p - c.value).abs() > rel_tol * scale {
            flagged.push(TermDiff { name: c.name, reference_value: p, chain_rule: c.value });
        }
    }
    Ok(LogExpansionAudit {
        oracle: w11_rate_oracle(w, 0.0, m)?,
        reference_total: sum_terms(&reference),
        chain_rule_total: sum_terms(&chain),
        flagged,
    })
}

/// `|a - b| <= tol * max(|a|, |b|, scale)`.
pub fn rel_close(a: f64, b: f64, tol: f64, scale: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyjet::jet::jet_from_poly;
    use crate::polyjet::poly::poly_from_ints;

    #[test]
    fn constant_jet_has_zero_rate() {
        let w = Jet::constant(3, &[0.0; 3], 2.5);
        for alpha in [0.0, 0.3, 0.75, 1.0] {
            assert_eq!(w11_rate_oracle(&w, alpha, 2.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn nonpositive_value_rejected() {
        let w = Jet::constant(2, &[0.0; 2], -1.0);
        assert!(matches!(w11_rate_oracle(&w, 0.5, 2.0), Err(Error::Domain { .. })));
        // v = e^w is fine for any w
        assert!(w11_rate_oracle(&w, 0.0, 2.0).is_ok());
    }

    #[test]
    fn expansion_matches_oracle_off_origin() {
        let w = poly_from_ints(
            3,
            &[(&[0, 0, 0], 3), (&[1, 0, 0], 1), (&[2, 1, 0], -1), (&[0, 2, 1], 2), (&[1, 1, 1], 1), (&[4, 0, 0], -1)],
        );
        let j = jet_from_poly(&w, &[0.25, -0.5, 0.125]).unwrap();
        for alpha in [0.2, 0.6, 1.0] {
            let t = expanded_rate_terms(&j, alpha, 2.5).unwrap();
            let o = w11_rate_oracle(&j, alpha, 2.5).unwrap();
            assert!(rel_close(sum_terms(&t), o, 1e-10, 1.0), "alpha {alpha}: {} vs {o}", sum_terms(&t));
        }
    }

    #[test]
    fn chain_rule_alpha0_matches_oracle() {
        let w = poly_from_ints(2, &[(&[1, 0], 2), (&[1, 2], 1), (&[2, 0], -3), (&[3, 1], 1)]);
        let j = jet_from_poly(&w, &[0.5, 0.25]).unwrap();
        let a = log_expansion_audit(&j, 2.0, 1e-12).unwrap();
        assert!(rel_close(a.chain_rule_total, a.oracle, 1e-10, 1.0));
        let names: Vec<_> = a.flagged.iter().map(|d| d.name).collect();
        assert_eq!(names, vec!["m e^w w_1 w_k w_k1", "m e^w w_11 w_k^2"]);
    }
}
