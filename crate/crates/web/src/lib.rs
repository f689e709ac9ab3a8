//! Browser bindings: family construction, radial profile curves and a small
//! 2D evolution with the origin probe.

use wasm_bindgen::prelude::*;

use pme_concavity::assembly::{assemble_with_radius_search, build_cutoff, build_profile, AssemblyOptions};
use pme_concavity::construction::{origin_rate, solve_steepness, ConstructionParams};
use pme_concavity::solver::{default_horizon, discretize, evolve, EvolveOptions};
use pme_concavity::verifier::{check_condition1, check_condition2, SampleSpec};

const MARGIN: f64 = 0.5;
/// Sample counts kept small so the page stays responsive.
const DEMO_SAMPLES: usize = 1500;
const DEMO_HALVINGS: u32 = 20;

fn js_err(e: pme_concavity::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Family, steepness, closed-form origin rate and its summands as `key=value` lines.
#[wasm_bindgen]
pub fn construct(alpha: f64, m: f64, n: usize) -> Result<String, JsError> {
    construct_text(alpha, m, n).map_err(js_err)
}

pub fn construct_text(alpha: f64, m: f64, n: usize) -> pme_concavity::Result<String> {
    let st = solve_steepness(alpha, m, n, MARGIN)?;
    let p = ConstructionParams::new(alpha, m, n, st)?;
    let w = p.build()?;
    let rate = origin_rate(&p)?;
    let c1 = check_condition1(&w);
    let spec = SampleSpec { count: DEMO_SAMPLES, ..SampleSpec::default() };
    let c2 = check_condition2(&w, p.rho, &spec)?;
    let mut kv = p.to_kv();
    kv.push("condition1", c1.pass);
    kv.push(format!("condition2_at_rho_{}", p.rho), c2.pass);
    kv.extend("rate.", &rate.to_kv());
    Ok(kv.to_text())
}

/// Interleaved `[r, f(r), ψ(r)]` on the unit ball, `samples` radii in `[0, 1)`.
#[wasm_bindgen]
pub fn profile_curves(alpha: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    profile_samples(alpha, samples).map_err(js_err)
}

pub fn profile_samples(alpha: f64, samples: usize) -> pme_concavity::Result<Vec<f64>> {
    let f = build_profile(alpha, 1.0)?;
    let psi = build_cutoff(1.0)?;
    let mut out = Vec::with_capacity(3 * samples);
    for i in 0..samples {
        let r = i as f64 / samples as f64;
        out.extend([r, f.value(r), psi.radial(r).0]);
    }
    Ok(out)
}

/// Probe series and final field of a 2D run.
#[wasm_bindgen]
pub struct DemoRun {
    times: Vec<f64>,
    lambda1: Vec<f64>,
    w11: Vec<f64>,
    field: Vec<f64>,
    res: usize,
    theta: f64,
    expected_rate: f64,
    detection: f64,
}

#[wasm_bindgen]
impl DemoRun {
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }
    pub fn lambda1(&self) -> Vec<f64> {
        self.lambda1.clone()
    }
    pub fn w11(&self) -> Vec<f64> {
        self.w11.clone()
    }
    /// Final pressure, row-major `res × res`.
    pub fn field(&self) -> Vec<f64> {
        self.field.clone()
    }
    pub fn res(&self) -> usize {
        self.res
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn expected_rate(&self) -> f64 {
        self.expected_rate
    }
    /// First time with `lambda1 > theta`, or NaN.
    pub fn detection(&self) -> f64 {
        self.detection
    }
}

/// Assembles the 2D initial pressure for `(alpha, m)` and evolves it at `res`.
#[wasm_bindgen]
pub fn evolve_2d(alpha: f64, m: f64, res: usize) -> Result<DemoRun, JsError> {
    run_2d(alpha, m, res).map_err(js_err)
}

pub fn run_2d(alpha: f64, m: f64, res: usize) -> pme_concavity::Result<DemoRun> {
    let st = solve_steepness(alpha, m, 2, MARGIN)?;
    let p = ConstructionParams::new(alpha, m, 2, st)?;
    let w = p.build()?;
    let opts = AssemblyOptions { samples: DEMO_SAMPLES, ..AssemblyOptions::default() };
    let bundle = assemble_with_radius_search(&p, &w, &opts, DEMO_HALVINGS)?;
    let horizon = default_horizon(&bundle, res)?;
    let field = discretize(&bundle, res)?;
    let (end, s) = evolve(field, m, alpha, &EvolveOptions::new(horizon, 1))?;
    Ok(DemoRun {
        times: s.times.clone(),
        lambda1: s.lambda1.clone(),
        w11: s.w11.clone(),
        field: end.values,
        res,
        theta: s.theta,
        expected_rate: bundle.expected_origin_rate()?,
        detection: s.detection.map_or(f64::NAN, |d| d.0),
    })
}
