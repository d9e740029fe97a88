//! Trajectories on random ill-conditioned quadratics across damping values.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use hhb_core::discrete::{count_nonmonotone, count_nonmonotone_above, run, RunStatus, Trajectory};
use hhb_core::objectives::ObjectiveModel;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::methods::{Family, Method};
use crate::plot::{Chart, Series};
use crate::problems::ProblemConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadConfig {
    pub n: usize,
    pub lipschitz: f64,
    pub h: f64,
    /// Damping values `K`, with `β = 1 − √h·K`.
    pub k_values: Vec<f64>,
    /// `K̄` of the switched variants (their `K_` is the swept `K`).
    pub k_hi: f64,
    pub iterations: usize,
    /// Seeds `seed, seed + 1, …`.
    pub trials: u64,
    pub methods: Vec<Method>,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            n: 50,
            lipschitz: 1e3,
            h: 1e-4,
            k_values: vec![1.97, 0.5, 1.0, 1.5],
            k_hi: 50.0,
            iterations: 5000,
            trials: 1,
            methods: Method::QUAD_DEFAULT.to_vec(),
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_values.is_empty() || self.methods.is_empty() || self.trials == 0 {
            bail!("quad needs nonempty K values, methods and trials");
        }
        if !(self.h > 0.0) {
            bail!("stepsize must be positive, got {}", self.h);
        }
        Ok(())
    }
}

/// Roughly the level where the computed gap is rounding noise: the gap of a
/// perturbation of relative size `10^{1.5}·ε_mach` at the scale of the iterates.
pub fn noise_floor(model: &ObjectiveModel, q0: &DVector<f64>) -> f64 {
    let scale = model.minimizer.as_ref().map_or(0.0, |q| q.norm()).max(q0.norm());
    1e3 * 0.5 * model.lipschitz * (f64::EPSILON * scale).powi(2)
}

/// Least-squares slope of `log₁₀ gap` against `k` over the tail: the second
/// half of the run up to the first gap within `10³` of `floor`.
pub fn tail_slope(gaps: &[f64], floor: f64) -> Option<f64> {
    let end = gaps.iter().position(|&g| !(g > 1e3 * floor)).unwrap_or(gaps.len());
    let pts: Vec<(f64, f64)> = gaps[..end].iter().enumerate().skip(end / 2).map(|(k, &g)| (k as f64, g.log10())).collect();
    if pts.len() < 10 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone)]
pub struct QuadRun {
    pub seed: u64,
    pub k: f64,
    pub method: Method,
    pub status: RunStatus,
    pub final_gap: Option<f64>,
    /// Steps where the gap increased.
    pub nonmonotone: usize,
    /// Increases starting above the rounding floor.
    pub nonmonotone_above_floor: usize,
    pub resets: usize,
    pub tail_slope: Option<f64>,
    pub trajectory: Trajectory,
}

fn run_one(model: &ObjectiveModel, q0: &DVector<f64>, floor: f64, cfg: &QuadConfig, seed: u64, k: f64, method: Method) -> Result<QuadRun> {
    if method.family() == Family::Switched && k > cfg.k_hi {
        bail!("{method} needs K ≤ K̄ = {}, got K = {k}", cfg.k_hi);
    }
    let params = method.params_from_damping(cfg.h.sqrt(), k, cfg.k_hi)?;
    let traj = run(model, &params, q0, cfg.iterations, 0.0)?;
    if traj.status == RunStatus::Diverged {
        log::warn!("{method} diverged at K = {k}, seed {seed}");
    }
    let gaps = traj.gaps().expect("quadratic optimum is known");
    Ok(QuadRun {
        seed,
        k,
        method,
        status: traj.status,
        final_gap: traj.records.last().and_then(|r| r.phi_gap),
        nonmonotone: count_nonmonotone(&traj)?,
        nonmonotone_above_floor: count_nonmonotone_above(&traj, floor)?,
        resets: traj.reset_count(),
        tail_slope: tail_slope(&gaps, floor),
        trajectory: traj,
    })
}

/// All `(seed, K, method)` runs, in that nesting order.
pub fn run_quad(cfg: &QuadConfig, seed: u64) -> Result<Vec<QuadRun>> {
    cfg.validate()?;
    let problem = ProblemConfig::Quadratic { n: cfg.n, lipschitz: cfg.lipschitz };
    let seeds: Vec<u64> = (0..cfg.trials).map(|i| seed.wrapping_add(i)).collect();
    let per_seed = seeds
        .par_iter()
        .map(|&s| -> Result<Vec<QuadRun>> {
            let (model, q0) = problem.build(s)?;
            let floor = noise_floor(&model, &q0);
            let jobs: Vec<(f64, Method)> = cfg.k_values.iter().flat_map(|&k| cfg.methods.iter().map(move |&m| (k, m))).collect();
            jobs.par_iter().map(|&(k, m)| run_one(&model, &q0, floor, cfg, s, k, m)).collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

pub fn summary_csv(runs: &[QuadRun]) -> String {
    let mut s = String::from("seed,K,method,status,final_gap,nonmonotone,nonmonotone_above_floor,resets,tail_slope\n");
    let opt = |x: Option<f64>| x.map(|v| format!("{v:.16e}")).unwrap_or_default();
    for r in runs {
        let status = serde_json::to_value(r.status).expect("status serializes");
        let _ = writeln!(
            s,
            "{},{:.16e},{},{},{},{},{},{},{}",
            r.seed,
            r.k,
            r.method,
            status.as_str().unwrap_or_default(),
            opt(r.final_gap),
            r.nonmonotone,
            r.nonmonotone_above_floor,
            r.resets,
            opt(r.tail_slope)
        );
    }
    s
}

/// Gap trajectories of every method at one `(seed, K)`.
pub fn gap_chart(runs: &[&QuadRun]) -> String {
    let title = runs.first().map_or(String::new(), |r| format!("seed {}, K = {}", r.seed, r.k));
    let mut chart = Chart::new(title, "k", "phi(q_k) - phi*", true);
    for r in runs {
        let pts = r.trajectory.records.iter().filter_map(|rec| rec.phi_gap.map(|g| (rec.k as f64, g))).collect();
        chart = chart.with_series(Series::new(r.method.name(), pts));
    }
    chart.to_svg()
}
