//! Scheme checks against the closed-form solutions in [`super::reference`].

use super::reference::{front_position, Barenblatt, TravellingWave};
use super::{
    admissible_dt, default_horizon, discretize, evolve, require_interior, step_into, EvolveOptions, GridField,
    ProbeSeries,
};
use crate::assembly::AssemblyBundle;
use crate::error::{Error, Result};
use crate::sampling::norm;

/// Outcome of a Barenblatt run.
#[derive(Clone, Debug)]
pub struct BarenblattRun {
    pub res: usize,
    /// Max error over nodes with `|x|` at most half the final support radius.
    pub interior_error: f64,
    pub series: ProbeSeries,
}

/// Evolves the `n`-dimensional Barenblatt pressure (support radius 1/2 at
/// `t0 = 1`, box `[-1, 1]^n`) over `horizon` with the stability-rule dt, and
/// compares with the closed form.
pub fn barenblatt_run(n: usize, m: f64, res: usize, horizon: f64, alpha: f64) -> Result<BarenblattRun> {
    let b = Barenblatt::with_radius(n, m, 1.0, 0.5);
    let field = GridField::from_fn(n, 1.0, res, |x| Ok(b.pressure(x, 0.0)))?;
    let opts = EvolveOptions { horizon, probe_stride: 1, min_steps: 1 };
    let (end, series) = evolve(field, m, alpha, &opts)?;
    require_interior(&series)?;
    let r_in = 0.5 * b.support_radius(end.t);
    let mut x = vec![0.0; n];
    let mut err = 0.0f64;
    for (i, &v) in end.values.iter().enumerate() {
        end.coords_into(i, &mut x);
        if norm(&x) <= r_in {
            err = err.max((v - b.pressure(&x, end.t)).abs());
        }
    }
    Ok(BarenblattRun { res, interior_error: err, series })
}

/// Front speed of the 1D travelling wave with speed `c` on `[-1, 1]`, starting
/// with the front at `x = -1/2`. The right boundary node follows the exact solution.
pub fn travelling_wave_speed(c: f64, res: usize, horizon: f64) -> Result<f64> {
    let shift = 0.5 / c;
    let w = TravellingWave { c };
    let exact = |x: f64, t: f64| w.pressure(&[x], t + shift);
    let mut cur = GridField::from_fn(1, 1.0, res, |x| Ok(exact(x[0], 0.0)))?;
    let mut next = cur.clone();
    let m = 2.0;
    while cur.t < horizon {
        let dt = admissible_dt(&cur, m).min(horizon / 200.0).min(horizon - cur.t);
        step_into(&cur, &mut next, m, dt)?;
        next.values[res - 1] = exact(1.0, next.t);
        std::mem::swap(&mut cur, &mut next);
    }
    let level = 0.05 * c;
    let start = front_position(&GridField::from_fn(1, 1.0, res, |x| Ok(exact(x[0], 0.0)))?.values, -1.0, cur.h, level);
    let end = front_position(&cur.values, -1.0, cur.h, level);
    match (start, end) {
        (Some(a), Some(b)) => Ok((a - b) / cur.t),
        _ => Err(Error::InvalidParameter("front not found".into())),
    }
}

/// Probe series of an assembled bundle at several resolutions over a common horizon.
#[derive(Clone, Debug)]
pub struct HeadlineRun {
    /// Closed-form `∂t w~_11(0)`.
    pub expected_rate: f64,
    pub horizon: f64,
    pub series: Vec<ProbeSeries>,
}

impl HeadlineRun {
    /// Measured initial rate over the closed form, per resolution.
    pub fn rate_ratios(&self) -> Vec<Option<f64>> {
        self.series.iter().map(|s| s.initial_rate().map(|r| r / self.expected_rate)).collect()
    }

    /// Detection times, per resolution.
    pub fn detection_times(&self) -> Vec<Option<f64>> {
        self.series.iter().map(|s| s.detection.map(|d| d.0)).collect()
    }

    /// Every run detects, and detection times do not increase with resolution.
    pub fn detections_consistent(&self) -> bool {
        let t = self.detection_times();
        t.iter().all(Option::is_some) && t.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Evolves the bundle at each resolution, probing every step, over the
/// [`default_horizon`] of the finest one.
pub fn headline_run(bundle: &AssemblyBundle, resolutions: &[usize]) -> Result<HeadlineRun> {
    let finest = *resolutions.iter().max().ok_or_else(|| Error::InvalidParameter("no resolutions".into()))?;
    let horizon = default_horizon(bundle, finest)?;
    let mut series = Vec::with_capacity(resolutions.len());
    for &res in resolutions {
        let field = discretize(bundle, res)?;
        let opts = EvolveOptions::new(horizon, 1);
        series.push(evolve(field, bundle.params.m, bundle.params.alpha, &opts)?.1);
    }
    Ok(HeadlineRun { expected_rate: bundle.expected_origin_rate()?, horizon, series })
}
