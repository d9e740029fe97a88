//! Tuned methods on a seeded logistic-regression problem.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use hhb_core::discrete::{run, Trajectory};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::methods::Method;
use crate::plot::{Chart, Series};
use crate::problems::ProblemConfig;
use crate::tune::{tune_method, SearchConfig, Tuned};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogregConfig {
    pub n: usize,
    pub m: usize,
    pub iterations: usize,
    /// Gap level whose first-passage iteration is reported.
    pub target: f64,
    pub reference_iters: usize,
    pub reference_tol: f64,
    pub methods: Vec<Method>,
    pub search: SearchConfig,
}

impl Default for LogregConfig {
    fn default() -> Self {
        Self {
            n: 20,
            m: 1000,
            iterations: 200,
            target: 1e-6,
            reference_iters: 1_000_000,
            reference_tol: 1e-10,
            methods: Method::LOGREG_DEFAULT.to_vec(),
            search: SearchConfig::default(),
        }
    }
}

impl LogregConfig {
    pub fn problem(&self) -> ProblemConfig {
        ProblemConfig::Logistic { n: self.n, m: self.m, reference_iters: self.reference_iters, reference_tol: self.reference_tol }
    }
}

#[derive(Debug, Clone)]
pub struct LogregRun {
    pub tuned: Tuned,
    pub trajectory: Trajectory,
    pub iters_to_target: Option<usize>,
    pub final_gap: Option<f64>,
}

/// Tunes every method, then runs each for the full iteration count.
pub fn run_logreg(cfg: &LogregConfig, seed: u64) -> Result<Vec<LogregRun>> {
    if cfg.methods.is_empty() {
        bail!("logreg needs at least one method");
    }
    let (model, q0) = cfg.problem().build(seed)?;
    cfg.methods
        .par_iter()
        .map(|&m| {
            let tuned = tune_method(&model, m, &q0, &cfg.search)?;
            let trajectory = run(&model, &tuned.params()?, &q0, cfg.iterations, 0.0)?;
            log::info!("{m}: h = {:.4e}, β̄ = {:.4}, β_ = {:.4}", tuned.h, tuned.beta_hi, tuned.beta_lo);
            Ok(LogregRun {
                iters_to_target: trajectory.first_below(cfg.target),
                final_gap: trajectory.records.last().and_then(|r| r.phi_gap),
                tuned,
                trajectory,
            })
        })
        .collect()
}

pub fn summary_csv(runs: &[LogregRun]) -> String {
    let mut s = String::from("method,h,beta_hi,beta_lo,schedule,iters_to_target,final_gap\n");
    for r in runs {
        let t = &r.tuned;
        let _ = writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{},{},{}",
            t.method,
            t.h,
            t.beta_hi,
            t.beta_lo,
            t.schedule,
            r.iters_to_target.map(|k| k.to_string()).unwrap_or_default(),
            r.final_gap.map(|g| format!("{g:.16e}")).unwrap_or_default()
        );
    }
    s
}

pub fn gap_chart(runs: &[LogregRun]) -> String {
    let mut chart = Chart::new("Logistic regression", "k", "phi(q_k) - phi*", true);
    for r in runs {
        let pts = r.trajectory.records.iter().filter_map(|rec| rec.phi_gap.map(|g| (rec.k as f64, g))).collect();
        chart = chart.with_series(Series::new(r.tuned.method.name(), pts));
    }
    chart.to_svg()
}
