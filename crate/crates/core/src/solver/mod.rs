//! Explicit finite-difference evolution of the pressure equation with a
//! concavity probe at the origin.

mod grid;
mod probe;
pub mod reference;
mod scheme;
pub mod validation;

use std::io::Write;
use std::path::Path;

pub use grid::{GridField, SNAPSHOT_MAGIC};
pub use probe::probe;
pub use scheme::{admissible_dt, step, step_into, StepStats};

use crate::assembly::AssemblyBundle;
use crate::error::{Error, Result};
use crate::kv::KeyValues;

/// Box half width as a multiple of the ball radius.
pub const BOX_PADDING: f64 = 1.25;
/// Fraction of the padding a front at the initial maximal speed may cross
/// within [`default_horizon`].
pub const HORIZON_FRACTION: f64 = 0.25;
/// Default minimum number of steps over the horizon.
pub const MIN_STEPS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    pub horizon: f64,
    pub probe_stride: usize,
    /// dt is capped at `horizon / min_steps`; 1 leaves only the stability rule.
    pub min_steps: usize,
}

impl EvolveOptions {
    pub fn new(horizon: f64, probe_stride: usize) -> EvolveOptions {
        EvolveOptions { horizon, probe_stride, min_steps: MIN_STEPS }
    }
}

/// Samples `v0` on the padded box; nodes on or outside the sphere are zero.
pub fn discretize(bundle: &AssemblyBundle, res: usize) -> Result<GridField> {
    if res < 33 || res % 2 == 0 {
        return Err(Error::Resolution(res));
    }
    GridField::from_fn_dd(bundle.n(), BOX_PADDING * bundle.rho(), res, |x| bundle.v0_dd(x))
}

/// Horizon over which a front moving at the largest initial gradient crosses
/// [`HORIZON_FRACTION`] of the padding between the ball and the box.
pub fn default_horizon(bundle: &AssemblyBundle, res: usize) -> Result<f64> {
    let field = discretize(bundle, res)?;
    let g = field.max_gradient();
    if !(g > 0.0) {
        return Err(Error::InvalidParameter("initial pressure has no gradient".into()));
    }
    Ok(HORIZON_FRACTION * (field.half_width - bundle.rho()) / g)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProbeSeries {
    pub times: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub w11: Vec<f64>,
    pub max_v: Vec<f64>,
    pub mass_proxy: Vec<f64>,
    pub clamp_norm: Vec<f64>,
    pub res: usize,
    pub h: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub steps: usize,
    /// Detection threshold `10 h²`.
    pub theta: f64,
    /// First probed time with `lambda1 > theta`, and `lambda1` there.
    pub detection: Option<(f64, f64)>,
    /// Set when the run stopped because the support reached the box boundary.
    pub support_at_boundary: Option<f64>,
}

impl ProbeSeries {
    fn new(field: &GridField) -> ProbeSeries {
        ProbeSeries {
            res: field.res,
            h: field.h,
            theta: 10.0 * field.h * field.h,
            dt_min: f64::INFINITY,
            ..Default::default()
        }
    }

    fn record(&mut self, field: &GridField, alpha: f64, m: f64, clamp: f64) -> Result<()> {
        let (l1, hess) = probe(field, alpha)?;
        self.times.push(field.t);
        self.lambda1.push(l1);
        self.w11.push(hess[0][0]);
        self.max_v.push(field.max_value());
        self.mass_proxy.push(field.mass_proxy(m));
        self.clamp_norm.push(clamp);
        if self.detection.is_none() && l1 > self.theta {
            self.detection = Some((field.t, l1));
        }
        Ok(())
    }

    /// `(w11(t1) - w11(0)) / t1` from the first two probes.
    pub fn initial_rate(&self) -> Option<f64> {
        (self.times.len() >= 2 && self.times[0] == 0.0).then(|| (self.w11[1] - self.w11[0]) / self.times[1])
    }

    /// Largest relative drift of the mass proxy from its first value.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.mass_proxy.first().copied().unwrap_or(0.0);
        if m0 == 0.0 {
            return 0.0;
        }
        self.mass_proxy.iter().map(|m| (m / m0 - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Largest `clamp_norm / max_v` over the run.
    pub fn relative_clamp(&self) -> f64 {
        self.clamp_norm.iter().zip(&self.max_v).map(|(c, v)| if *v > 0.0 { c / v } else { 0.0 }).fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "t,w11,lambda1,max_v,mass_proxy,clamp_norm")?;
        for i in 0..self.times.len() {
            writeln!(
                f,
                "{:e},{:e},{:e},{:e},{:e},{:e}",
                self.times[i], self.w11[i], self.lambda1[i], self.max_v[i], self.mass_proxy[i], self.clamp_norm[i]
            )?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.push("res", self.res);
        kv.push_f64("h", self.h);
        kv.push_f64("dt_min", self.dt_min);
        kv.push_f64("dt_max", self.dt_max);
        kv.push("steps", self.steps);
        kv.push_f64("theta", self.theta);
        kv.push("probes", self.times.len());
        match self.detection {
            Some((t, l)) => {
                kv.push_f64("detection.t", t);
                kv.push_f64("detection.lambda1", l);
            }
            None => {
                kv.push("detection.t", "none");
            }
        }
        if let Some(r) = self.initial_rate() {
            kv.push_f64("initial_rate", r);
        }
        kv.push_f64("mass_drift", self.mass_drift());
        kv.push_f64("relative_clamp", self.relative_clamp());
        if let Some(t) = self.support_at_boundary {
            kv.push_f64("support_at_boundary", t);
        }
        kv
    }
}

/// Evolves `field` over the horizon, probing `v^α` every `probe_stride` steps
/// and at the end. Stops early, with `support_at_boundary` set, if the
/// support reaches the layer next to the box boundary.
pub fn evolve(field: GridField, m: f64, alpha: f64, opts: &EvolveOptions) -> Result<(GridField, ProbeSeries)> {
    let EvolveOptions { horizon, probe_stride, min_steps } = *opts;
    if !(horizon > 0.0) || probe_stride == 0 || min_steps == 0 {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} and probe stride {probe_stride} must be positive"
        )));
    }
    let mut series = ProbeSeries::new(&field);
    series.record(&field, alpha, m, 0.0)?;
    let t_end = field.t + horizon;
    let mut cur = field;
    let mut next = cur.clone();
    let mut clamp = 0.0f64;
    loop {
        let remaining = t_end - cur.t;
        if remaining <= horizon * 1e-12 {
            break;
        }
        let admissible = admissible_dt(&cur, m);
        if admissible == f64::INFINITY && cur.max_value() == 0.0 {
            cur.t = t_end;
            series.record(&cur, alpha, m, 0.0)?;
            series.steps += 1;
            break;
        }
        let dt = admissible.min(horizon / min_steps as f64).min(remaining);
        let stats = step_into(&cur, &mut next, m, dt)?;
        std::mem::swap(&mut cur, &mut next);
        series.steps += 1;
        series.dt_min = series.dt_min.min(dt);
        series.dt_max = series.dt_max.max(dt);
        clamp = clamp.max(stats.clamp_norm);
        let last = t_end - cur.t <= horizon * 1e-12;
        if stats.boundary_contact {
            series.record(&cur, alpha, m, clamp)?;
            series.support_at_boundary = Some(cur.t);
            break;
        }
        if series.steps % probe_stride == 0 || last {
            series.record(&cur, alpha, m, clamp)?;
            clamp = 0.0;
        }
    }
    Ok((cur, series))
}

/// Discretizes the bundle and evolves it with its own `m` and `α`.
pub fn evolve_and_probe(bundle: &AssemblyBundle, res: usize, horizon: f64, probe_stride: usize) -> Result<ProbeSeries> {
    let field = discretize(bundle, res)?;
    let (_, series) = evolve(field, bundle.params.m, bundle.params.alpha, &EvolveOptions::new(horizon, probe_stride))?;
    Ok(series)
}

/// Whether the series was cut short by the support reaching the box boundary.
pub fn require_interior(series: &ProbeSeries) -> Result<()> {
    match series.support_at_boundary {
        Some(t) => Err(Error::SupportAtBoundary { t }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::reference::Barenblatt;
    use super::*;

    #[test]
    fn zero_field_series_is_zero() {
        let g = GridField::zeros(2, 1.0, 33).unwrap();
        let (_, s) = evolve(g, 2.0, 1.0, &EvolveOptions::new(0.1, 1)).unwrap();
        assert!(s.lambda1.iter().chain(&s.w11).all(|&v| v == 0.0));
        assert_eq!(*s.times.last().unwrap(), 0.1);
    }

    #[test]
    fn times_increase_and_lambda_dominates_w11() {
        let b = Barenblatt::with_radius(2, 2.0, 1.0, 0.5);
        let g = GridField::from_fn(2, 1.0, 33, |x| Ok(b.pressure(x, 0.0))).unwrap();
        let (_, s) = evolve(g, 2.0, 0.5, &EvolveOptions::new(0.05, 3)).unwrap();
        assert!(s.times.windows(2).all(|w| w[1] > w[0]));
        assert!(s.lambda1.iter().zip(&s.w11).all(|(l, w)| l >= w));
        assert!(s.support_at_boundary.is_none());
    }

    #[test]
    fn support_reaching_the_boundary_aborts() {
        let g = GridField::from_fn(1, 1.0, 65, |x| Ok((x[0] + 0.8).max(0.0))).unwrap();
        let (_, s) = evolve(g, 2.0, 1.0, &EvolveOptions::new(10.0, 1)).unwrap();
        let t = s.support_at_boundary.expect("tagged");
        assert!(t < 1.0);
        assert!(require_interior(&s).is_err());
    }
}
