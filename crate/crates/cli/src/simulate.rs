//! Continuous-time simulation of the heavy-ball flow and its hybrid variants.

use anyhow::{bail, Result};
use hhb_core::hybrid::{integrate_hb, integrate_hhb, integrate_hihb, HybridArc, HybridParams, HybridState};
use hhb_core::objectives::ObjectiveModel;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::plot::{Chart, Series};
use crate::problems::ProblemConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Hb,
    Hhb,
    Hihb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub system: System,
    pub problem: ProblemConfig,
    /// Damping of `HB` and `HHB`.
    pub k: f64,
    pub k_lo: f64,
    pub k_hi: f64,
    /// Dwell time of `HHB`; defaults to `10⁻³/√L`.
    pub t_min: Option<f64>,
    pub step: f64,
    pub t_end: f64,
    /// Start position (at rest); defaults to the problem's start point.
    pub q0: Option<Vec<f64>>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            system: System::Hhb,
            problem: ProblemConfig::Scalar { curvature: 1.0 },
            k: 0.0,
            k_lo: 0.1,
            k_hi: 5.0,
            t_min: None,
            step: 1e-3,
            t_end: 10.0,
            q0: None,
        }
    }
}

pub struct Simulation {
    pub model: ObjectiveModel,
    pub params: HybridParams,
    pub arc: HybridArc,
}

pub fn run_simulate(cfg: &SimulateConfig, seed: u64) -> Result<Simulation> {
    let (model, start) = cfg.problem.build(seed)?;
    let q0 = match &cfg.q0 {
        Some(q) if q.len() != model.dim() => bail!("q0 has {} entries, the problem has dimension {}", q.len(), model.dim()),
        Some(q) => DVector::from_column_slice(q),
        None => start,
    };
    let z0 = HybridState::at_rest(q0);
    let t_min = cfg.t_min.unwrap_or_else(|| HybridParams::default_t_min(model.lipschitz));
    let (params, arc) = match cfg.system {
        System::Hb => {
            let params = HybridParams::hhb(cfg.k, t_min, cfg.step)?;
            (params, integrate_hb(&model, cfg.k, &z0, cfg.t_end, cfg.step)?)
        }
        System::Hhb => {
            let params = HybridParams::hhb(cfg.k, t_min, cfg.step)?;
            (params, integrate_hhb(&model, &params, &z0, cfg.t_end)?)
        }
        System::Hihb => {
            let params = HybridParams::hihb(cfg.k_lo, cfg.k_hi, cfg.step)?;
            (params, integrate_hihb(&model, &params, &z0, cfg.t_end)?)
        }
    };
    Ok(Simulation { model, params, arc })
}

/// `φ(q) − φ* + ½|p|²` against flow time.
pub fn energy_chart(sim: &Simulation) -> String {
    let phi_star = sim.model.min_value.unwrap_or(0.0);
    let pts = sim.arc.samples.iter().map(|s| (s.t, s.energy - phi_star)).collect();
    Chart::new("Energy along the arc", "t", "energy - phi*", true).with_series(Series::new("energy", pts)).to_svg()
}
