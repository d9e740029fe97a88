//! Stepsize and momentum tuning by bracketed search on the gap reached
//! within an iteration budget.
//!
//! The outer search runs over `log h`; for every stepsize it visits, an inner
//! search picks the momentum coefficient the method exposes. Both searches
//! scan a uniform grid, then shrink the bracket around the best grid point by
//! golden-section steps.

use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::{bail, Result};
use hhb_core::discrete::{run, AlgoParams, RunStatus, Variant};
use hhb_core::objectives::ObjectiveModel;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::methods::{Family, Method};
use crate::problems::ProblemConfig;

const INV_PHI: f64 = 0.618_033_988_749_894_9;
/// `1 − β` is searched on `[10^MIN_LOG_SLACK, 1]`.
const MIN_LOG_SLACK: f64 = -6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Iterations after which the gap is scored.
    pub budget: usize,
    /// Stepsizes searched, as multiples of `1/L`.
    pub h_range: (f64, f64),
    /// Uniform grid points per search before refinement.
    pub grid: usize,
    /// Golden-section steps after the grid.
    pub refine: usize,
    /// Gaps at or below this level tie; ties go to whichever got there first.
    pub floor: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { budget: 50, h_range: (1e-2, 4.0), grid: 13, refine: 10, floor: 1e-12 }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 || self.grid < 3 {
            bail!("tuning needs a positive budget and at least 3 grid points");
        }
        let (lo, hi) = self.h_range;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            bail!("stepsize range must satisfy 0 < lo < hi, got ({lo}, {hi})");
        }
        if !(self.floor > 0.0) {
            bail!("gap floor must be positive");
        }
        Ok(())
    }
}

/// Tuned parameters and how they scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tuned {
    pub method: Method,
    pub h: f64,
    pub beta_hi: f64,
    pub beta_lo: f64,
    /// Nesterov's accelerated `β` schedule replaces constant momentum.
    pub schedule: bool,
    pub budget: usize,
    pub gap_at_budget: Option<f64>,
    pub score: f64,
    pub evaluations: usize,
}

impl Tuned {
    pub fn params(&self) -> Result<AlgoParams> {
        if self.schedule {
            return Ok(AlgoParams::nesterov_schedule(self.h)?);
        }
        match self.method.family() {
            Family::Gradient => Ok(AlgoParams::gradient_descent(self.h)?),
            _ => Ok(AlgoParams::from_stepsize(self.h, self.beta_lo, self.beta_hi, self.method.variant())?),
        }
    }
}

/// What the inner search varies for each method. Classic Nesterov uses the
/// accelerated schedule and has no momentum knob; the reset variants fix
/// `β_ = 0` and tune `β̄`; the switched variants fix `β̄ = 1` (no damping
/// while descending) and tune `β_`.
fn knob_params(method: Method, h: f64, beta: f64) -> Result<AlgoParams> {
    let v = method.variant();
    Ok(match (method, method.family()) {
        (_, Family::Gradient) => AlgoParams::gradient_descent(h)?,
        (Method::Nesterov, _) => AlgoParams::nesterov_schedule(h)?,
        (_, Family::Classic) => AlgoParams::from_stepsize(h, beta, beta, v)?,
        (_, Family::Reset) => AlgoParams::from_stepsize(h, 0.0, beta, v)?,
        (_, Family::Switched) => AlgoParams::from_stepsize(h, beta, 1.0, v)?,
    })
}

fn has_knob(method: Method) -> bool {
    !matches!(method, Method::Gd | Method::Nesterov)
}

/// Lower is better: `log₁₀` of the gap at the budget, or for runs that reach
/// the floor, `log₁₀(floor)` minus the iterations to spare.
pub fn score_run(model: &ObjectiveModel, params: &AlgoParams, q0: &DVector<f64>, cfg: &SearchConfig) -> Result<(f64, Option<f64>)> {
    let traj = run(model, params, q0, cfg.budget, 0.0)?;
    if traj.status == RunStatus::Diverged {
        return Ok((f64::INFINITY, None));
    }
    let gap = traj.records.last().and_then(|r| r.phi_gap);
    let Some(g) = gap else { bail!("tuning needs a known optimum") };
    let score = match traj.first_below(cfg.floor) {
        Some(k) => cfg.floor.log10() - (cfg.budget - k) as f64,
        None if g.is_finite() => g.log10(),
        None => f64::INFINITY,
    };
    Ok((score, gap))
}

struct Found<T> {
    x: f64,
    value: f64,
    payload: T,
}

/// Grid scan of `[lo, hi]` followed by golden-section refinement around the
/// best grid point. Returns the best point visited; ties keep the earliest.
fn minimize<T, F>(f: F, lo: f64, hi: f64, grid: usize, refine: usize) -> Result<Found<T>>
where
    T: Clone + Send,
    F: Fn(f64) -> Result<(f64, T)> + Sync,
{
    let xs: Vec<f64> = (0..grid).map(|i| lo + (hi - lo) * i as f64 / (grid - 1) as f64).collect();
    let vals = xs.par_iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
    let mut best_i = 0;
    for (i, v) in vals.iter().enumerate() {
        if v.0 < vals[best_i].0 {
            best_i = i;
        }
    }
    let mut best = Found { x: xs[best_i], value: vals[best_i].0, payload: vals[best_i].1.clone() };
    if !best.value.is_finite() {
        return Ok(best);
    }
    let eval = |x: f64, best: &mut Found<T>| -> Result<f64> {
        let (v, p) = f(x)?;
        if v < best.value {
            (best.x, best.value, best.payload) = (x, v, p);
        }
        Ok(v)
    };
    let (mut a, mut b) = (xs[best_i.saturating_sub(1)], xs[(best_i + 1).min(grid - 1)]);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c, &mut best)?;
    let mut fd = eval(d, &mut best)?;
    for _ in 0..refine {
        if fc <= fd {
            (b, d, fd) = (d, c, fc);
            c = b - INV_PHI * (b - a);
            fc = eval(c, &mut best)?;
        } else {
            (a, c, fc) = (c, d, fd);
            d = a + INV_PHI * (b - a);
            fd = eval(d, &mut best)?;
        }
    }
    Ok(best)
}

/// Tunes `method` on `model` from `q0`.
pub fn tune_method(model: &ObjectiveModel, method: Method, q0: &DVector<f64>, cfg: &SearchConfig) -> Result<Tuned> {
    cfg.validate()?;
    let l = model.lipschitz;
    let (h_lo, h_hi) = ((cfg.h_range.0 / l).log10(), (cfg.h_range.1 / l).log10());
    let runs = AtomicUsize::new(0);
    let score = |h: f64, beta: f64| {
        runs.fetch_add(1, Ordering::Relaxed);
        score_run(model, &knob_params(method, h, beta)?, q0, cfg)
    };
    let inner = |h: f64| -> Result<(f64, (f64, Option<f64>))> {
        if !has_knob(method) {
            let (s, gap) = score(h, 0.0)?;
            return Ok((s, (0.0, gap)));
        }
        let slack = |u: f64| 1.0 - 10f64.powf(u);
        let found = minimize(|u| score(h, slack(u)), MIN_LOG_SLACK, 0.0, cfg.grid, cfg.refine)?;
        Ok((found.value, (slack(found.x), found.payload)))
    };
    let found = minimize(|x: f64| inner(10f64.powf(x)), h_lo, h_hi, cfg.grid, cfg.refine)?;
    if !found.value.is_finite() {
        bail!("every {method} run diverged over the stepsize range");
    }
    let h = 10f64.powf(found.x);
    let (beta, gap) = found.payload;
    let p = knob_params(method, h, beta)?;
    Ok(Tuned {
        method,
        h,
        beta_hi: p.beta_hi,
        beta_lo: p.beta_lo,
        schedule: p.variant == Variant::NesSchedule,
        budget: cfg.budget,
        gap_at_budget: gap,
        score: found.value,
        evaluations: runs.into_inner(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    pub problem: ProblemConfig,
    pub methods: Vec<Method>,
    pub search: SearchConfig,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            problem: ProblemConfig::Quadratic { n: 10, lipschitz: 100.0 },
            methods: vec![Method::Nesterov],
            search: SearchConfig { budget: 200, ..SearchConfig::default() },
        }
    }
}

/// Tunes every configured method on the seeded problem, in method order.
pub fn run_tune(cfg: &TuneConfig, seed: u64) -> Result<Vec<Tuned>> {
    if cfg.methods.is_empty() {
        bail!("tune needs at least one method");
    }
    let (model, q0) = cfg.problem.build(seed)?;
    cfg.methods.par_iter().map(|&m| tune_method(&model, m, &q0, &cfg.search)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimize_finds_interior_minimum() {
        let f = |x: f64| Ok(((x - 0.3).powi(2), x));
        let found = minimize(f, -1.0, 2.0, 7, 40).unwrap();
        assert!((found.x - 0.3).abs() < 1e-6, "{}", found.x);
        assert_eq!(found.payload, found.x);
        // a minimum at the boundary stays there
        let found = minimize(|x: f64| Ok((x, ())), 0.0, 1.0, 5, 20).unwrap();
        assert_eq!(found.x, 0.0);
    }

    #[test]
    fn knobs_map_to_parameters() {
        let p = knob_params(Method::HihbPol, 0.01, 0.5).unwrap();
        assert_eq!((p.beta_lo, p.beta_hi), (0.5, 1.0));
        let p = knob_params(Method::HhbNes, 0.01, 0.5).unwrap();
        assert_eq!((p.beta_lo, p.beta_hi), (0.0, 0.5));
        assert_eq!(knob_params(Method::Nesterov, 0.01, 0.5).unwrap().variant, Variant::NesSchedule);
        assert!(!has_knob(Method::Gd) && has_knob(Method::Polyak));
    }
}
