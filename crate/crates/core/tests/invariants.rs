use proptest::prelude::*;

use pme_concavity::construction::{case2_raw_terms, case2_simplified_terms, ConstructionParams, Family};
use pme_concavity::polyjet::oracle::{rel_close, sum_terms};
use pme_concavity::polyjet::poly::poly_from_ints;
use pme_concavity::polyjet::{
    expanded_rate_terms, jet_combine, jet_from_poly, jet_power, w11_rate_oracle, Combine, Poly,
};
use pme_concavity::solver::{admissible_dt, step_into, GridField};
use pme_concavity::verifier::{
    check_condition2, hessian_report, leading_minor_poly, minor_leading_order, rho_search, SampleSpec, Verdict,
    EIGEN_DEAD_BAND,
};

/// Monomials of total degree `<= deg` in `n` variables.
fn monomials(n: usize, deg: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|e: Vec<u32>| {
                let used: u32 = e.iter().sum();
                (0..=deg - used).map(move |k| {
                    let mut e = e.clone();
                    e.push(k);
                    e
                })
            })
            .collect();
    }
    out
}

fn poly_from_coeffs(n: usize, deg: u32, coeffs: &[i64]) -> Poly {
    let mons = monomials(n, deg);
    let terms: Vec<(&[u32], i64)> = mons.iter().zip(coeffs).map(|(e, &c)| (e.as_slice(), c)).collect();
    poly_from_ints(n, &terms)
}

/// Dyadic point with coordinates in `[-1, 1]` on the 1/8 lattice.
fn dyadic_point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-8i32..=8).prop_map(|k| k as f64 / 8.0), n)
}

fn cubic_pair() -> impl Strategy<Value = (usize, Vec<i64>, Vec<i64>, Vec<f64>)> {
    (2usize..=3).prop_flat_map(|n| {
        let len = monomials(n, 3).len();
        (Just(n), prop::collection::vec(-5i64..=5, len), prop::collection::vec(-5i64..=5, len), dyadic_point(n))
    })
}

/// Quartic with constant term 4 so it stays positive on the small points used.
fn positive_quartic() -> impl Strategy<Value = (usize, Vec<i64>, Vec<f64>)> {
    (2usize..=3).prop_flat_map(|n| {
        let len = monomials(n, 4).len();
        let point = prop::collection::vec((-4i32..=4).prop_map(|k| k as f64 / 32.0), n);
        (Just(n), prop::collection::vec(-3i64..=3, len), point)
    })
}

fn with_constant(n: usize, mut coeffs: Vec<i64>, c: i64) -> Poly {
    // the zero exponent comes first in `monomials`
    coeffs[0] = c;
    poly_from_coeffs(n, 4, &coeffs)
}

fn admissible_alpha() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(1.0), 0.0f64..0.49, 0.51f64..0.99]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn leibniz_rule_is_exact((n, a, b, x) in cubic_pair()) {
        let (p, q) = (poly_from_coeffs(n, 3, &a), poly_from_coeffs(n, 3, &b));
        let direct = jet_from_poly(&p.mul(&q), &x).unwrap();
        let combined = jet_combine(&jet_from_poly(&p, &x).unwrap(), Combine::Mul(&jet_from_poly(&q, &x).unwrap())).unwrap();
        prop_assert_eq!(direct.base(), combined.base());
        let (a, b): (Vec<_>, Vec<_>) = (direct.coefficients().collect(), combined.coefficients().collect());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn power_inversion((n, c, x) in positive_quartic(), k in 1usize..=9) {
        let alpha = k as f64 / 10.0;
        let j = jet_from_poly(&with_constant(n, c, 4), &x).unwrap();
        prop_assume!(j.value() > 0.5);
        let back = jet_power(&jet_power(&j, alpha).unwrap(), 1.0 / alpha).unwrap();
        let scale = j.coefficients().map(|(_, v)| v.abs()).fold(1.0, f64::max);
        for ((_, a), (_, b)) in j.coefficients().zip(back.coefficients()) {
            prop_assert!((a - b).abs() <= 1e-12 * scale, "{} vs {}", a, b);
        }
    }

    #[test]
    fn expansion_matches_oracle_at_generic_points((n, c, x) in positive_quartic(), alpha in 0.05f64..=1.0, m in 1.1f64..4.0) {
        let j = jet_from_poly(&with_constant(n, c, 4), &x).unwrap();
        prop_assume!(j.value() > 0.5);
        let terms = expanded_rate_terms(&j, alpha, m).unwrap();
        let oracle = w11_rate_oracle(&j, alpha, m).unwrap();
        let scale: f64 = terms.iter().map(|t| t.value.abs()).sum();
        prop_assert!(rel_close(sum_terms(&terms), oracle, 1e-9, scale), "{} vs {}", sum_terms(&terms), oracle);
    }

    #[test]
    fn families_are_symmetric_in_the_transverse_coordinates(alpha in admissible_alpha(), n in 2usize..=4, st in 0.5f64..8.0, swap in 0usize..3) {
        let st = (st * 64.0).round() / 64.0;
        let w = ConstructionParams::new(alpha, 2.0, n, st).unwrap().build().unwrap();
        for i in 1..n {
            prop_assert_eq!(w.flip(i), w.clone());
        }
        if n >= 3 {
            let mut perm: Vec<usize> = (0..n).collect();
            let a = 1 + swap % (n - 1);
            let b = 1 + (swap + 1) % (n - 1);
            perm.swap(a, b);
            prop_assert_eq!(w.permute(&perm), w);
        }
    }

    #[test]
    fn origin_hessian_pattern(alpha in admissible_alpha(), m in 1.1f64..4.0, n in 2usize..=4, st in 0.5f64..8.0) {
        let p = ConstructionParams::new(alpha, m, n, st).unwrap();
        let j = p.origin_jet().unwrap();
        prop_assert_eq!(j.d(&[0, 0]), 0.0);
        for i in 0..n {
            for k in 0..n {
                let h = j.d(&[i, k]);
                if i == k && i >= 1 {
                    prop_assert!(h < 0.0);
                } else {
                    prop_assert_eq!(h, 0.0);
                }
            }
        }
    }

    #[test]
    fn case2_forms_agree(alpha in 0.51f64..0.99, m in 1.1f64..4.0, n in 2usize..=4, b in 0.3f64..5.0) {
        let raw = case2_raw_terms(alpha, m, n, b);
        let simple = case2_simplified_terms(alpha, m, n, b);
        let scale: f64 = raw.iter().map(|v| v.abs()).sum();
        prop_assert!(rel_close(raw.iter().sum(), simple.iter().sum(), 1e-12, scale));
    }

    #[test]
    fn sylvester_verdict_matches_eigenvalue(alpha in admissible_alpha(), n in 2usize..=4, st in 0.5f64..8.0, x in prop::collection::vec(-1.0f64..1.0, 4)) {
        let w = ConstructionParams::new(alpha, 2.0, n, st).unwrap().build().unwrap();
        let r = hessian_report(&w, &x[..n]).unwrap();
        match r.verdict {
            Verdict::NegativeDefinite => prop_assert!(r.max_eigenvalue < EIGEN_DEAD_BAND),
            Verdict::NegativeSemidefinite => prop_assert!(r.max_eigenvalue <= EIGEN_DEAD_BAND),
            Verdict::Indefinite => prop_assert!(r.max_eigenvalue > EIGEN_DEAD_BAND),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    /// `|minor_j - leading part| <= K |x|^3` on the ball, with `K` the sum of the
    /// absolute remainder coefficients times `rho^(deg - 3)`.
    #[test]
    fn leading_order_dominates(alpha in admissible_alpha(), n in 2usize..=3, dir in prop::collection::vec(-1.0f64..1.0, 3)) {
        let family = Family::for_alpha(alpha).unwrap();
        let st = if family == Family::Case1 { 7.5 } else { 1.625 };
        let w = ConstructionParams::new(alpha, 2.0, n, st).unwrap().build().unwrap();
        let rho: f64 = 0.25;
        let norm = dir[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        for j in 1..=n {
            let full = leading_minor_poly(&w, j).unwrap();
            let lead = minor_leading_order(&w, j).unwrap();
            let rest = full.sub(&lead);
            let s = w.field().s_f64();
            let k: f64 = rest
                .terms()
                .map(|(e, c)| c.to_f64(s).abs() * rho.powi(e.order() as i32 - 3))
                .sum();
            for scale in 0..4 {
                let r = rho / 2f64.powi(scale);
                let x: Vec<f64> = dir[..n].iter().map(|v| v / norm * r).collect();
                let gap = (full.eval_f64(&x) - lead.eval_f64(&x)).abs();
                prop_assert!(gap <= k * r.powi(3) * (1.0 + 1e-9) + 1e-300, "j {}: {} > {}", j, gap, k * r.powi(3));
            }
        }
    }

    /// Positivity and the discrete maximum principle for a random sum of
    /// truncated paraboloids.
    #[test]
    fn scheme_keeps_positivity_and_maximum(centers in prop::collection::vec((-0.3f64..0.3, -0.3f64..0.3, 0.05f64..0.3), 1..4), m in 1.2f64..3.0) {
        let f = GridField::from_fn(2, 1.0, 41, |x| {
            Ok(centers.iter().map(|&(a, b, r)| (r * r - (x[0] - a).powi(2) - (x[1] - b).powi(2)).max(0.0)).sum())
        }).unwrap();
        let mut cur = f;
        let mut next = cur.clone();
        let mut max = cur.max_value();
        for _ in 0..40 {
            let dt = admissible_dt(&cur, m);
            let stats = step_into(&cur, &mut next, m, dt).unwrap();
            std::mem::swap(&mut cur, &mut next);
            prop_assert!(cur.values.iter().all(|&v| v >= 0.0));
            prop_assert!(stats.clamp_norm <= 1e-12 * max.max(1e-300));
            let now = cur.max_value();
            prop_assert!(now <= max + 1e-10, "{} > {}", now, max);
            max = now;
        }
    }
}

#[test]
fn steps_do_not_depend_on_thread_count() {
    let f = GridField::from_fn(3, 1.0, 33, |x| {
        Ok((0.4 - x.iter().map(|v| v * v).sum::<f64>()).max(0.0) * (1.0 + 0.3 * x[0]))
    })
    .unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut cur = f.clone();
            let mut next = cur.clone();
            for _ in 0..10 {
                let dt = admissible_dt(&cur, 2.0);
                step_into(&cur, &mut next, 2.0, dt).unwrap();
                std::mem::swap(&mut cur, &mut next);
            }
            cur
        })
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.values, b.values);
    assert_eq!(a.lo, b.lo);
}

#[test]
fn condition2_passes_after_halving() {
    let spec = SampleSpec { count: 2000, ..SampleSpec::default() };
    for (alpha, st) in [(1.0, 7.5), (0.75, 1.625), (0.25, 1.5)] {
        let w = ConstructionParams::new(alpha, 2.0, 3, st).unwrap().build().unwrap();
        let s = rho_search(&w, &spec).unwrap();
        assert!(s.trajectory.last().unwrap().1);
        for k in 1..=3 {
            let r = s.rho / 2f64.powi(k);
            assert!(check_condition2(&w, r, &spec).unwrap().pass, "alpha {alpha}: fails at {r}");
        }
    }
}
