//! Globalization of the local polynomial: `w~ = A F + ψ w_in` on `B_rho`, the
//! amplitude search, and the initial pressure `v0`.
//!
//! `w_in = 1 + L (w - 1)` with `L = 1 + A * plateau`, so that near the origin
//! `w~ = L w`: a positive multiple of the verified polynomial.

pub mod cutoff;
pub mod profile;

use rayon::prelude::*;

pub use cutoff::{build_cutoff, smooth_step, Cutoff};
pub use profile::{build_profile, AlphaCase, RadialProfile};

use crate::construction::{origin_rate, ConstructionParams};
use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::linalg::jacobi_eigenvalues;
use crate::polyjet::number::Q;
use crate::polyjet::oracle::w11_rate_oracle;
use crate::polyjet::{jet_from_poly, Ext, MultiIndex, Poly};
use crate::sampling::{norm, punctured_ball_samples, sphere_points};

/// Polynomial with floating-point coefficients for fast pointwise evaluation.
#[derive(Clone, Debug, PartialEq)]
struct F64Poly {
    terms: Vec<(Vec<u32>, f64)>,
}

impl F64Poly {
    fn new(p: &Poly) -> F64Poly {
        let s = p.field().s_f64();
        F64Poly { terms: p.terms().map(|(k, v)| (k.0.clone(), v.to_f64(s))).collect() }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(k, c)| c * k.iter().zip(x).map(|(&e, xi)| xi.powi(e as i32)).product::<f64>()).sum()
    }
}

/// Polynomial with double-double coefficients.
#[derive(Clone, Debug, PartialEq)]
struct DdPoly {
    terms: Vec<(Vec<u32>, Dd)>,
}

impl DdPoly {
    fn new(p: &Poly) -> DdPoly {
        let s = p.field().s2.as_ref().map_or(Dd::ZERO, |s2| Dd::from_q(s2).sqrt());
        DdPoly { terms: p.terms().map(|(k, v)| (k.0.clone(), Dd::from_q(&v.a) + Dd::from_q(&v.b) * s)).collect() }
    }

    fn eval(&self, x: &[Dd]) -> Dd {
        self.terms.iter().fold(Dd::ZERO, |acc, (k, c)| acc + k.iter().zip(x).fold(*c, |m, (&e, xi)| m * xi.powi(e)))
    }
}

/// Value, gradient and Hessian of a polynomial, precompiled.
#[derive(Clone, Debug, PartialEq)]
struct Derivs {
    value: F64Poly,
    grad: Vec<F64Poly>,
    hess: Vec<Vec<F64Poly>>,
    exact: DdPoly,
}

impl Derivs {
    fn new(p: &Poly) -> Derivs {
        let n = p.dim();
        Derivs {
            value: F64Poly::new(p),
            grad: (0..n).map(|i| F64Poly::new(&p.partial(&[i]))).collect(),
            hess: (0..n).map(|i| (0..n).map(|j| F64Poly::new(&p.partial(&[i, j]))).collect()).collect(),
            exact: DdPoly::new(p),
        }
    }
}

/// Settings of the amplitude search and its sampled checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssemblyOptions {
    pub samples: usize,
    /// Required upper bound `-threshold` on the top eigenvalue of `D^2 w~` off `B_{rho/100}`.
    pub threshold: f64,
    pub max_doublings: u32,
    pub offset: u64,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions { samples: 10_000, threshold: 1e-6, max_doublings: 50, offset: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct AssemblyBundle {
    /// `rho` and `amplitude` hold the ball radius and `A`.
    pub params: ConstructionParams,
    pub w: Poly,
    /// `L = 1 + A * plateau` (1 for `alpha = 0`).
    pub inner_scale: f64,
    /// `1 + L (w - 1)`.
    pub w_inner: Poly,
    /// `None` means `ψ ≡ 1` (the `alpha = 0` construction).
    pub psi: Option<Cutoff>,
    pub profile: RadialProfile,
    pub boundary_gradient_floor: f64,
    derivs: Derivs,
}

impl AssemblyBundle {
    fn new(
        params: &ConstructionParams,
        w: &Poly,
        psi: Option<Cutoff>,
        profile: RadialProfile,
        amplitude: f64,
    ) -> Result<Self> {
        let inner_scale = if psi.is_some() { 1.0 + amplitude * profile.plateau_value } else { 1.0 };
        let w_inner = scaled_about_one(w, inner_scale)?;
        let mut params = params.clone();
        params.rho = profile.rho;
        params.amplitude = amplitude;
        Ok(AssemblyBundle {
            derivs: Derivs::new(&w_inner),
            params,
            w: w.clone(),
            inner_scale,
            w_inner,
            psi,
            profile,
            boundary_gradient_floor: f64::NAN,
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.params.amplitude
    }

    pub fn rho(&self) -> f64 {
        self.params.rho
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    fn psi_radial(&self, r: f64) -> (f64, f64, f64) {
        self.psi.as_ref().map_or((1.0, 0.0, 0.0), |c| c.radial(r))
    }

    pub fn psi_value(&self, x: &[f64]) -> f64 {
        self.psi_radial(norm(x)).0
    }

    /// `w~(x)` for `|x| < rho`.
    pub fn w_tilde(&self, x: &[f64]) -> f64 {
        let r = norm(x);
        self.amplitude() * self.profile.value(r) + self.psi_radial(r).0 * self.derivs.value.eval(x)
    }

    /// `D^2 w~ = A D^2F + ψ D^2 w_in + w_in D^2ψ + Dψ ⊗ Dw_in + Dw_in ⊗ Dψ`.
    pub fn w_tilde_hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = x.len();
        let r = norm(x);
        let d = &self.derivs;
        let (psi, p1, p2) = self.psi_radial(r);
        let mut h: Vec<Vec<f64>> = d.hess.iter().map(|row| row.iter().map(|p| psi * p.eval(x)).collect()).collect();
        if r > self.profile.inner_knot() {
            let (_, f1, f2) = self.profile.eval(r);
            let a = self.amplitude();
            let xh: Vec<f64> = x.iter().map(|v| v / r).collect();
            let wv = d.value.eval(x);
            let g: Vec<f64> = d.grad.iter().map(|p| p.eval(x)).collect();
            for i in 0..n {
                for j in 0..n {
                    let proj = xh[i] * xh[j];
                    let eye = if i == j { 1.0 } else { 0.0 };
                    h[i][j] += a * (f2 * proj + f1 / r * (eye - proj));
                    if p1 != 0.0 || p2 != 0.0 {
                        h[i][j] += wv * (p2 * proj + p1 / r * (eye - proj));
                        h[i][j] += p1 * (xh[i] * g[j] + g[i] * xh[j]);
                    }
                }
            }
        }
        h
    }

    /// `v0 = w~^(1/alpha)`, `w~` for `alpha = 1`, `e^{w~}` for `alpha = 0`; zero on and outside the sphere.
    pub fn v0(&self, x: &[f64]) -> Result<f64> {
        if norm(x) >= self.rho() {
            return Ok(0.0);
        }
        let wt = self.w_tilde(x);
        match self.profile.alpha_case {
            AlphaCase::Zero => Ok(wt.exp()),
            AlphaCase::One | AlphaCase::Fractional(_) if wt <= 0.0 => {
                Err(Error::Domain { value: wt, point: x.to_vec() })
            }
            AlphaCase::One => Ok(wt),
            AlphaCase::Fractional(a) => Ok(wt.powf(1.0 / a)),
        }
    }

    /// `v0` in double-double precision; agrees with [`Self::v0`] to f64 rounding.
    pub fn v0_dd(&self, x: &[Dd]) -> Result<Dd> {
        let r = x.iter().fold(Dd::ZERO, |acc, &v| acc + v * v).sqrt();
        if r.hi >= self.rho() {
            return Ok(Dd::ZERO);
        }
        let psi = self.psi.as_ref().map_or(Dd::ONE, |c| c.radial_dd(r));
        let wt = self.profile.value_dd(r) * self.amplitude() + psi * self.derivs.exact.eval(x);
        match self.profile.alpha_case {
            AlphaCase::Zero => Ok(wt.exp()),
            _ if wt.hi <= 0.0 => Err(Error::Domain { value: wt.hi, point: x.iter().map(|v| v.to_f64()).collect() }),
            AlphaCase::One => Ok(wt),
            AlphaCase::Fractional(a) => Ok(wt.powf(Dd::ONE / Dd::from(a))),
        }
    }

    /// `w~` on `B_{rho/4}` as an exact polynomial: `A * plateau + w_in`.
    /// Closed-form `∂t w~_11(0)`: the rate of `w` scaled by `L^{1+1/alpha}`,
    /// or by `e^{A plateau}` for `alpha = 0`.
    pub fn expected_origin_rate(&self) -> Result<f64> {
        let base = origin_rate(&self.params)?.total;
        Ok(match self.profile.alpha_case {
            AlphaCase::Zero => (self.amplitude() * self.profile.plateau_value).exp() * base,
            _ => self.inner_scale.powf(1.0 + 1.0 / self.params.alpha) * base,
        })
    }

    pub fn core_poly(&self) -> Result<Poly> {
        let shift = self.amplitude() * self.profile.plateau_value;
        let c = Q::from_float(shift).ok_or_else(|| Error::InvalidParameter(format!("non-finite shift {shift}")))?;
        let mut p = self.w_inner.clone();
        p.add_term(MultiIndex::zero(p.dim()), Ext::from(c));
        Ok(p)
    }

    pub fn to_manifest(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.push("kind", "assembly_bundle");
        kv.extend("params.", &self.params.to_kv());
        kv.push_f64("amplitude", self.amplitude());
        kv.push_f64("rho", self.rho());
        kv.push_f64("inner_scale", self.inner_scale);
        kv.push("psi.kind", if self.psi.is_some() { "smooth_step" } else { "constant_one" });
        if let Some(c) = &self.psi {
            kv.push_f64("psi.inner", c.inner()).push_f64("psi.outer", c.outer()).push_f64("psi.c_psi", c.c_psi);
        }
        let p = &self.profile;
        kv.push("profile.case", p.alpha_case);
        kv.push_f64("profile.plateau", p.plateau_value);
        kv.push_f64("profile.knot_inner", p.inner_knot()).push_f64("profile.knot_outer", p.outer_knot());
        for (k, c) in p.middle.iter().enumerate() {
            kv.push_f64(format!("profile.middle.{k}"), *c);
        }
        kv.push_f64("profile.fprime_bound", p.fprime_bound);
        kv.push_f64("profile.fsecond_bound", p.fsecond_bound);
        kv.push_f64("profile.c", p.derivative_bound_c);
        kv.push_f64("boundary_gradient_floor", self.boundary_gradient_floor);
        for (i, line) in self.w.to_text().lines().enumerate() {
            kv.push(format!("w.{i}"), line);
        }
        kv
    }

    /// Rebuilds a bundle from its manifest; every derived quantity is recomputed
    /// and must reproduce the stored value exactly.
    pub fn from_manifest(kv: &KeyValues) -> Result<AssemblyBundle> {
        if kv.get("kind") != Some("assembly_bundle") {
            return Err(Error::Parse { line: 0, msg: "not an assembly bundle manifest".into() });
        }
        let mut pk = KeyValues::new();
        let mut text = String::new();
        for (k, v) in kv.entries() {
            if let Some(rest) = k.strip_prefix("params.") {
                pk.push(rest, v);
            } else if k.starts_with("w.") {
                text.push_str(v);
                text.push('\n');
            }
        }
        let params = ConstructionParams::from_kv(&pk)?;
        let w = Poly::from_text(&text)?;
        let rho = kv.f64("rho")?;
        let psi = match kv.require("psi.kind")? {
            "smooth_step" => Some(build_cutoff(rho)?),
            "constant_one" => None,
            other => return Err(Error::Parse { line: 0, msg: format!("unknown cutoff '{other}'") }),
        };
        let profile = build_profile(params.alpha, rho)?;
        let mut b = AssemblyBundle::new(&params, &w, psi, profile, kv.f64("amplitude")?)?;
        b.boundary_gradient_floor = kv.f64("boundary_gradient_floor")?;
        let rebuilt = b.to_manifest();
        for (k, v) in kv.entries() {
            if rebuilt.get(k) != Some(v.as_str()) {
                return Err(Error::Parse { line: 0, msg: format!("manifest key '{k}' does not reproduce ({v})") });
            }
        }
        Ok(b)
    }
}

fn scaled_about_one(w: &Poly, l: f64) -> Result<Poly> {
    let lq = Q::from_float(l).ok_or_else(|| Error::InvalidParameter(format!("non-finite scale {l}")))?;
    let one = Poly::constant(w.dim(), w.field().clone(), Ext::one());
    Ok(w.sub(&one).scale(&Ext::from(lq)).add(&one))
}

/// Sample set for concavity checks: the punctured ball minus `B_{rho/100}` and
/// minus the `rho/100` shell at the boundary.
pub fn concavity_samples(n: usize, rho: f64, count: usize, offset: u64) -> Vec<Vec<f64>> {
    let eps = rho / 100.0;
    punctured_ball_samples(n, rho, count, 6, offset)
        .into_iter()
        .filter(|x| {
            let r = norm(x);
            r >= eps && r <= rho - eps
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampledStats {
    pub max_eigenvalue: f64,
    /// Minimum of `w~` over the samples.
    pub min_w_tilde: f64,
}

fn sampled_stats(b: &AssemblyBundle, pts: &[Vec<f64>]) -> SampledStats {
    let per: Vec<(f64, f64)> = pts
        .par_iter()
        .map(|x| {
            let ev = jacobi_eigenvalues(&b.w_tilde_hessian(x));
            (*ev.last().unwrap(), b.w_tilde(x))
        })
        .collect();
    per.iter().fold(SampledStats { max_eigenvalue: f64::NEG_INFINITY, min_w_tilde: f64::INFINITY }, |s, &(e, v)| {
        SampledStats { max_eigenvalue: s.max_eigenvalue.max(e), min_w_tilde: s.min_w_tilde.min(v) }
    })
}

fn accepts(b: &AssemblyBundle, s: &SampledStats, opts: &AssemblyOptions) -> bool {
    let positive = matches!(b.profile.alpha_case, AlphaCase::Zero) || s.min_w_tilde > 0.0;
    s.max_eigenvalue <= -opts.threshold && positive
}

/// Chooses `A` by doubling from 1 until `D^2 w~ <= -threshold` on the sampled
/// region and `w~ > 0` there; for `alpha = 0`, `A = 1` and `ψ ≡ 1`.
pub fn assemble(
    params: &ConstructionParams,
    w: &Poly,
    psi: &Cutoff,
    profile: &RadialProfile,
    opts: &AssemblyOptions,
) -> Result<AssemblyBundle> {
    if (psi.rho - profile.rho).abs() > 0.0 {
        return Err(Error::InvalidParameter("cutoff and profile radii differ".into()));
    }
    let pts = concavity_samples(params.n, profile.rho, opts.samples, opts.offset);
    let finish = |mut b: AssemblyBundle| -> Result<AssemblyBundle> {
        b.boundary_gradient_floor = boundary_report(&b, opts.samples, opts.offset)?.floor;
        Ok(b)
    };
    if matches!(profile.alpha_case, AlphaCase::Zero) {
        let b = AssemblyBundle::new(params, w, None, profile.clone(), 1.0)?;
        let s = sampled_stats(&b, &pts);
        if !accepts(&b, &s, opts) {
            return Err(Error::AssemblyInfeasible(format!(
                "top eigenvalue {} with A = 1 and constant cutoff",
                s.max_eigenvalue
            )));
        }
        return finish(b);
    }
    let mut amplitude = 1.0;
    let mut last: Option<(f64, f64)> = None;
    for k in 0..=opts.max_doublings {
        let b = AssemblyBundle::new(params, w, Some(psi.clone()), profile.clone(), amplitude)?;
        let s = sampled_stats(&b, &pts);
        if accepts(&b, &s, opts) {
            return finish(b);
        }
        // for large A everything is linear in A; a stalled normalized state cannot recover
        let norm_state = (s.max_eigenvalue / b.inner_scale, s.min_w_tilde / b.inner_scale);
        if let Some(prev) = last {
            let stalled = (norm_state.0 - prev.0).abs() <= 1e-3 * prev.0.abs()
                && (norm_state.1 - prev.1).abs() <= 1e-3 * prev.1.abs().max(1e-300);
            if k >= 10 && stalled && (norm_state.0 >= 0.0 || norm_state.1 <= 0.0) {
                return Err(Error::AssemblyInfeasible(format!(
                    "stalled at A = {amplitude}: top eigenvalue {}, min w~ {}",
                    s.max_eigenvalue, s.min_w_tilde
                )));
            }
        }
        last = Some(norm_state);
        amplitude *= 2.0;
    }
    Err(Error::AssemblyInfeasible(format!("{} doublings of A exhausted", opts.max_doublings)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryReport {
    /// Minimum of `|∇v0|` over the boundary sample.
    pub floor: f64,
    /// Largest relative deviation from the closed-form boundary gradient.
    pub max_rel_error: f64,
    /// Largest relative deviation of `v0` from its closed form where `ψ = 0`.
    pub near_boundary_rel_error: f64,
    pub samples: usize,
}

/// Closed-form `|∇v0|` at a boundary point.
pub fn boundary_gradient_closed_form(b: &AssemblyBundle, x: &[f64]) -> f64 {
    let a = b.amplitude();
    match b.profile.alpha_case {
        AlphaCase::Fractional(al) => a.powf(1.0 / al),
        AlphaCase::One => 2.0 * a * b.rho(),
        AlphaCase::Zero => b.w.eval_f64(x).exp(),
    }
}

/// `|∇v0|` on the sphere by three-point one-sided differences along the inward normal.
pub fn boundary_report(b: &AssemblyBundle, samples: usize, offset: u64) -> Result<BoundaryReport> {
    let rho = b.rho();
    let delta = 1e-4 * rho;
    let pts = sphere_points(b.n(), rho, samples, offset);
    let per: Vec<Result<(f64, f64, f64)>> = pts
        .par_iter()
        .map(|x| {
            let at = |t: f64| -> Result<f64> {
                let y: Vec<f64> = x.iter().map(|v| v * (1.0 - t / rho)).collect();
                b.v0(&y)
            };
            let g = (-3.0 * at(0.0)? + 4.0 * at(delta)? - at(2.0 * delta)?) / (2.0 * delta);
            let exact = boundary_gradient_closed_form(b, x);
            // closed form of v0 itself just inside the support edge, where ψ = 0
            let t = 0.1 * rho;
            let y: Vec<f64> = x.iter().map(|v| v * (1.0 - t / rho)).collect();
            let a = b.amplitude();
            let near = match b.profile.alpha_case {
                AlphaCase::Fractional(al) => a.powf(1.0 / al) * t,
                AlphaCase::One => a * (rho * rho - (rho - t) * (rho - t)),
                AlphaCase::Zero => t * b.w.eval_f64(&y).exp(),
            };
            let got = b.v0(&y)?;
            Ok((g.abs(), (g.abs() - exact).abs() / exact, (got - near).abs() / near))
        })
        .collect();
    let mut rep =
        BoundaryReport { floor: f64::INFINITY, max_rel_error: 0.0, near_boundary_rel_error: 0.0, samples: pts.len() };
    for r in per {
        let (g, e, nb) = r?;
        rep.floor = rep.floor.min(g);
        rep.max_rel_error = rep.max_rel_error.max(e);
        rep.near_boundary_rel_error = rep.near_boundary_rel_error.max(nb);
    }
    Ok(rep)
}

/// Boundary report of the initial pressure; fails unless `|∇v0| > 0` on the sample.
pub fn initial_pressure(b: &AssemblyBundle, samples: usize) -> Result<BoundaryReport> {
    let rep = boundary_report(b, samples, 0)?;
    if !(rep.floor > 0.0) {
        return Err(Error::AssemblyInfeasible(format!("boundary gradient floor {}", rep.floor)));
    }
    Ok(rep)
}

/// Outcome of the sampled global checks on a bundle.
#[derive(Clone, Debug, PartialEq)]
pub struct BundleReport {
    /// Top eigenvalue of `D^2 w~` over the sample off `B_{rho/100}`.
    pub max_eigenvalue_off_core: f64,
    /// Top eigenvalue of `D^2 w~` over the sample inside `B_{rho/100}`.
    pub max_eigenvalue_core: f64,
    pub origin_eigenvalues: Vec<f64>,
    pub zero_eigenvalues_at_origin: usize,
    pub min_w_tilde: f64,
    pub psi_in_unit_interval: bool,
    pub boundary: BoundaryReport,
    /// `∂t w~_11(0)` from the jet oracle on `w~`.
    pub shifted_rate: f64,
    /// `L^{1+1/alpha}` (or `e^{plateau}` for `alpha = 0`) times the closed-form rate of `w`.
    pub expected_shifted_rate: f64,
}

impl BundleReport {
    pub fn pass(&self, threshold: f64) -> bool {
        self.max_eigenvalue_off_core <= -threshold
            && self.max_eigenvalue_core <= 0.0
            && self.zero_eigenvalues_at_origin == 1
            && self.psi_in_unit_interval
            && self.boundary.floor > 0.0
            && self.shifted_rate > 0.0
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.push_f64("max_eigenvalue_off_core", self.max_eigenvalue_off_core);
        kv.push_f64("max_eigenvalue_core", self.max_eigenvalue_core);
        kv.push(
            "origin_eigenvalues",
            self.origin_eigenvalues.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(","),
        );
        kv.push("zero_eigenvalues_at_origin", self.zero_eigenvalues_at_origin);
        kv.push_f64("min_w_tilde", self.min_w_tilde);
        kv.push("psi_in_unit_interval", self.psi_in_unit_interval);
        kv.push_f64("boundary.floor", self.boundary.floor);
        kv.push_f64("boundary.max_rel_error", self.boundary.max_rel_error);
        kv.push_f64("boundary.near_rel_error", self.boundary.near_boundary_rel_error);
        kv.push("boundary.samples", self.boundary.samples);
        kv.push_f64("shifted_rate", self.shifted_rate);
        kv.push_f64("expected_shifted_rate", self.expected_shifted_rate);
        kv
    }
}

/// Runs the sampled global checks on an assembled bundle.
pub fn check_bundle(b: &AssemblyBundle, samples: usize, offset: u64) -> Result<BundleReport> {
    let n = b.n();
    let rho = b.rho();
    let off = concavity_samples(n, rho, samples, offset);
    let s = sampled_stats(b, &off);
    let core: Vec<Vec<f64>> = punctured_ball_samples(n, rho / 100.0, samples / 10, 4, offset);
    let c = sampled_stats(b, &core);
    let origin = jacobi_eigenvalues(&b.w_tilde_hessian(&vec![0.0; n]));
    let scale = origin.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let zero_eigenvalues_at_origin = origin.iter().filter(|v| v.abs() <= 1e-12 * scale.max(1.0)).count();
    let psi_in_unit_interval = off.iter().all(|x| (0.0..=1.0).contains(&b.psi_value(x)));
    let boundary = boundary_report(b, samples, offset)?;
    let jet = jet_from_poly(&b.core_poly()?, &vec![0.0; n])?;
    let shifted_rate = w11_rate_oracle(&jet, b.params.alpha, b.params.m)?;
    let expected_shifted_rate = b.expected_origin_rate()?;
    Ok(BundleReport {
        max_eigenvalue_off_core: s.max_eigenvalue,
        max_eigenvalue_core: c.max_eigenvalue,
        origin_eigenvalues: origin,
        zero_eigenvalues_at_origin,
        min_w_tilde: s.min_w_tilde.min(c.min_w_tilde),
        psi_in_unit_interval,
        boundary,
        shifted_rate,
        expected_shifted_rate,
    })
}

/// Builds cutoff and profile at `params.rho` and assembles, halving the radius
/// while the amplitude search is infeasible.
pub fn assemble_with_radius_search(
    params: &ConstructionParams,
    w: &Poly,
    opts: &AssemblyOptions,
    max_halvings: u32,
) -> Result<AssemblyBundle> {
    let mut rho = params.rho;
    let mut last_err = None;
    for _ in 0..=max_halvings {
        let psi = build_cutoff(rho)?;
        let profile = build_profile(params.alpha, rho)?;
        let mut p = params.clone();
        p.rho = rho;
        match assemble(&p, w, &psi, &profile, opts) {
            Ok(b) => return Ok(b),
            Err(e @ (Error::AssemblyInfeasible(_) | Error::Domain { .. })) => last_err = Some(e),
            Err(e) => return Err(e),
        }
        rho /= 2.0;
    }
    Err(Error::AssemblyInfeasible(format!(
        "no radius down to {rho} admits an amplitude ({})",
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> AssemblyOptions {
        AssemblyOptions { samples: 1500, ..AssemblyOptions::default() }
    }

    fn bundle(alpha: f64, n: usize, st: f64, rho: f64) -> AssemblyBundle {
        let mut p = ConstructionParams::new(alpha, 2.0, n, st).unwrap();
        p.rho = rho;
        let w = p.build().unwrap();
        assemble_with_radius_search(&p, &w, &quick(), 12).unwrap()
    }

    #[test]
    fn core_is_shifted_inner_polynomial() {
        let b = bundle(1.0, 3, 7.5, 0.25);
        let rho = b.rho();
        let x = [0.2 * rho, -0.1 * rho, 0.05 * rho];
        let want = b.amplitude() * 7.0 * rho * rho / 8.0 + b.w_inner.eval_f64(&x);
        assert!((b.w_tilde(&x) - want).abs() < 1e-12 * want.abs());
        // and the core equals L w
        assert!((b.w_tilde(&x) - b.inner_scale * b.w.eval_f64(&x)).abs() < 1e-9 * want.abs());
    }

    #[test]
    fn log_case_uses_unit_amplitude() {
        let b = bundle(0.0, 2, 2.5, 0.25);
        assert_eq!(b.amplitude(), 1.0);
        assert!(b.psi.is_none());
        assert_eq!(b.inner_scale, 1.0);
        assert_eq!(b.psi_value(&[0.2, 0.1]), 1.0);
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let b = bundle(0.25, 2, 1.5, 0.125);
        let h = 1e-5 * b.rho();
        for x in [[0.3, 0.2], [-0.45, 0.3], [0.1, -0.6], [0.7, 0.1]] {
            let x = [x[0] * b.rho(), x[1] * b.rho()];
            let an = b.w_tilde_hessian(&x);
            for i in 0..2 {
                for j in 0..2 {
                    let mut pp = x;
                    let mut pm = x;
                    let mut mp = x;
                    let mut mm = x;
                    pp[i] += h;
                    pp[j] += h;
                    pm[i] += h;
                    pm[j] -= h;
                    mp[i] -= h;
                    mp[j] += h;
                    mm[i] -= h;
                    mm[j] -= h;
                    let fd = (b.w_tilde(&pp) - b.w_tilde(&pm) - b.w_tilde(&mp) + b.w_tilde(&mm)) / (4.0 * h * h);
                    assert!(
                        (fd - an[i][j]).abs() < 1e-4 * (1.0 + an[i][j].abs()),
                        "{x:?} {i}{j}: {fd} vs {}",
                        an[i][j]
                    );
                }
            }
        }
    }

    #[test]
    fn origin_has_one_zero_eigenvalue() {
        for (alpha, st) in [(1.0, 7.5), (0.75, 1.6), (0.0, 2.5)] {
            let b = bundle(alpha, 3, st, 0.25);
            let rep = check_bundle(&b, 1500, 0).unwrap();
            assert_eq!(rep.zero_eigenvalues_at_origin, 1, "{alpha}: {:?}", rep.origin_eigenvalues);
            assert!(rep.origin_eigenvalues[..2].iter().all(|&v| v < 0.0));
        }
    }

    #[test]
    fn boundary_gradient_closed_forms() {
        for (alpha, st) in [(0.25, 1.5), (1.0, 7.5), (0.0, 2.5)] {
            let b = bundle(alpha, 2, st, 0.25);
            let rep = initial_pressure(&b, 2000).unwrap();
            assert!(rep.floor > 0.0);
            assert!(rep.max_rel_error < 1e-6, "{alpha}: {}", rep.max_rel_error);
            assert!(rep.near_boundary_rel_error < 1e-9, "{alpha}: {}", rep.near_boundary_rel_error);
        }
    }

    #[test]
    fn shifted_rate_transfers() {
        for (alpha, st) in [(1.0, 7.5), (0.25, 1.5), (0.75, 1.6), (0.0, 2.5)] {
            let b = bundle(alpha, 3, st, 0.25);
            let rep = check_bundle(&b, 1000, 0).unwrap();
            assert!(rep.shifted_rate > 0.0);
            let rel = (rep.shifted_rate - rep.expected_shifted_rate).abs() / rep.expected_shifted_rate;
            assert!(rel < 1e-9, "{alpha}: {} vs {}", rep.shifted_rate, rep.expected_shifted_rate);
        }
    }

    #[test]
    fn v0_vanishes_on_and_outside_sphere() {
        let b = bundle(0.75, 2, 1.6, 0.25);
        assert_eq!(b.v0(&[b.rho(), 0.0]).unwrap(), 0.0);
        assert_eq!(b.v0(&[b.rho(), b.rho()]).unwrap(), 0.0);
        assert!(b.v0(&[0.0, 0.0]).unwrap() > 0.0);
    }

    #[test]
    fn double_double_v0_matches() {
        for (alpha, st) in [(0.0, 2.5), (0.25, 1.6), (0.75, 1.6), (1.0, 9.0)] {
            let b = bundle(alpha, 3, st, 0.25);
            for x in sphere_points(3, 0.9 * b.rho(), 50, 0).iter().chain(&sphere_points(3, 0.3 * b.rho(), 50, 0)) {
                let xd: Vec<Dd> = x.iter().map(|&v| Dd::from(v)).collect();
                let (a, e) = (b.v0(x).unwrap(), b.v0_dd(&xd).unwrap().to_f64());
                assert!((a - e).abs() <= 1e-10 * e.abs(), "alpha {alpha}: {a} vs {e}");
            }
        }
    }

    #[test]
    fn manifest_roundtrip() {
        let b = bundle(0.75, 3, 1.6, 0.25);
        let kv = b.to_manifest();
        let back = AssemblyBundle::from_manifest(&KeyValues::parse(&kv.to_text()).unwrap()).unwrap();
        assert_eq!(back.to_manifest(), kv);
        let x = [0.01, -0.02, 0.03];
        assert_eq!(back.v0(&x).unwrap(), b.v0(&x).unwrap());
        let mut bad = kv.clone();
        bad.push_f64("inner_scale", 3.0);
        assert!(AssemblyBundle::from_manifest(&bad).is_err());
    }
}
