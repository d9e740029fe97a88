//! Continuous-time heavy-ball dynamics: the plain flow `HB(K)`, the hybrid
//! system `HHB(K)` with momentum resets and a minimum dwell time, and the
//! switched-damping inclusion `HiHB(K_, K̄)`.
//!
//! Integration uses classical RK4 with a fixed step. Resets are located by
//! bisection on the step length.

mod arc;

pub use arc::{ArcSample, HybridArc, JumpEvent};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::objectives::ObjectiveModel;

/// Bisections allowed when locating a reset.
pub const MAX_EVENT_BISECTIONS: usize = 100;
/// Integration stops once `‖∇φ(q)‖` falls to this level.
pub const GRADIENT_STOP: f64 = 1e-10;

/// `(q, p, τ)`; `τ` is the time since the last reset (HHB only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridState {
    pub q: DVector<f64>,
    pub p: DVector<f64>,
    pub tau: f64,
}

impl HybridState {
    pub fn new(q: DVector<f64>, p: DVector<f64>, tau: f64) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::DimensionMismatch { expected: q.len(), got: p.len() });
        }
        if !(tau >= 0.0) {
            return Err(invalid(format!("timer must be nonnegative, got {tau}")));
        }
        Ok(Self { q, p, tau })
    }

    /// At rest at `q` with the timer cleared.
    pub fn at_rest(q: DVector<f64>) -> Self {
        let p = DVector::zeros(q.len());
        Self { q, p, tau: 0.0 }
    }

    fn is_finite(&self) -> bool {
        self.q.iter().chain(self.p.iter()).all(|x| x.is_finite()) && self.tau.is_finite()
    }

    fn axpy(&self, s: f64, d: &HybridState) -> HybridState {
        HybridState { q: &self.q + &d.q * s, p: &self.p + &d.p * s, tau: self.tau + d.tau * s }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridParams {
    /// Damping of `HB(K)` / `HHB(K)`.
    pub k: f64,
    /// Damping while momentum points downhill (HiHB).
    pub k_lo: f64,
    /// Damping while momentum points uphill (HiHB).
    pub k_hi: f64,
    /// Minimum flow time between resets.
    pub t_min: f64,
    /// RK4 step.
    pub step: f64,
    /// Width of the switching deadband and of located event times.
    pub event_tol: f64,
}

impl HybridParams {
    pub const DEFAULT_EVENT_TOL: f64 = 1e-10;

    pub fn hhb(k: f64, t_min: f64, step: f64) -> Result<Self> {
        let p = Self { k, k_lo: k, k_hi: k, t_min, step, event_tol: Self::DEFAULT_EVENT_TOL };
        p.validate_hhb()?;
        Ok(p)
    }

    pub fn hihb(k_lo: f64, k_hi: f64, step: f64) -> Result<Self> {
        let p = Self { k: k_hi, k_lo, k_hi, t_min: step, step, event_tol: Self::DEFAULT_EVENT_TOL };
        p.validate_hihb()?;
        Ok(p)
    }

    pub fn with_event_tol(mut self, event_tol: f64) -> Result<Self> {
        if !(event_tol > 0.0) {
            return Err(invalid(format!("event tolerance must be positive, got {event_tol}")));
        }
        self.event_tol = event_tol;
        Ok(self)
    }

    /// `10⁻³/√L`: small relative to the oscillation period scale.
    pub fn default_t_min(lipschitz: f64) -> f64 {
        1e-3 / lipschitz.sqrt()
    }

    fn validate_common(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(invalid(format!("integrator step must be positive, got {}", self.step)));
        }
        if !(self.event_tol > 0.0) {
            return Err(invalid(format!("event tolerance must be positive, got {}", self.event_tol)));
        }
        Ok(())
    }

    fn validate_hhb(&self) -> Result<()> {
        self.validate_common()?;
        if !(self.k >= 0.0) {
            return Err(invalid(format!("damping must be nonnegative, got {}", self.k)));
        }
        if !(self.t_min > 0.0) {
            return Err(invalid(format!("dwell time must be positive, got {}", self.t_min)));
        }
        Ok(())
    }

    fn validate_hihb(&self) -> Result<()> {
        self.validate_common()?;
        if !(self.k_lo > 0.0 && self.k_lo <= self.k_hi) {
            return Err(invalid(format!("need 0 < K_ ≤ K̄, got {} and {}", self.k_lo, self.k_hi)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowMode {
    /// Plain heavy-ball flow; the timer is frozen.
    Hb,
    /// Hybrid flow; the timer advances at unit rate.
    Hhb,
}

fn switching_value(state: &HybridState, model: &ObjectiveModel) -> Result<f64> {
    Ok(model.gradient(&state.q)?.dot(&state.p))
}

fn damped_field(state: &HybridState, model: &ObjectiveModel, k: f64, tau_rate: f64) -> Result<HybridState> {
    let g = model.gradient(&state.q)?;
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("gradient during flow".into()));
    }
    Ok(HybridState { q: state.p.clone(), p: -&state.p * k - g, tau: tau_rate })
}

/// `(q̇, ṗ, τ̇) = (p, −Kp − ∇φ(q), 1)`; `τ̇ = 0` in [`FlowMode::Hb`].
pub fn flow_map(state: &HybridState, params: &HybridParams, model: &ObjectiveModel, mode: FlowMode) -> Result<HybridState> {
    if !state.is_finite() {
        return Err(Error::NonFinite("state passed to the flow map".into()));
    }
    let rate = match mode {
        FlowMode::Hb => 0.0,
        FlowMode::Hhb => 1.0,
    };
    damped_field(state, model, params.k, rate)
}

/// `τ ≤ T_`, or `⟨∇φ(q), p⟩ ≤ 0` with `τ ≥ T_`.
pub fn in_flow_set(state: &HybridState, params: &HybridParams, model: &ObjectiveModel) -> Result<bool> {
    if state.tau <= params.t_min {
        return Ok(true);
    }
    Ok(switching_value(state, model)? <= 0.0)
}

/// `⟨∇φ(q), p⟩ ≥ 0` with `τ ≥ T_`.
pub fn in_jump_set(state: &HybridState, params: &HybridParams, model: &ObjectiveModel) -> Result<bool> {
    Ok(state.tau >= params.t_min && switching_value(state, model)? >= 0.0)
}

/// Reset: keep `q`, zero the momentum and the timer.
pub fn jump_map(state: &HybridState) -> HybridState {
    HybridState::at_rest(state.q.clone())
}

/// Damping of the switched system: `K̄` when momentum points uphill or lies
/// within `event_tol` of the switching surface, `K_` otherwise.
pub fn kappa_select(state: &HybridState, params: &HybridParams, model: &ObjectiveModel) -> Result<f64> {
    let s = switching_value(state, model)?;
    Ok(if s >= -params.event_tol { params.k_hi } else { params.k_lo })
}

/// `φ(q) + ½|p|²`.
pub fn energy(state: &HybridState, model: &ObjectiveModel) -> Result<f64> {
    Ok(model.value(&state.q)? + 0.5 * state.p.norm_squared())
}

fn rk4<F>(state: &HybridState, dt: f64, field: &F) -> Result<HybridState>
where
    F: Fn(&HybridState) -> Result<HybridState>,
{
    let k1 = field(state)?;
    let k2 = field(&state.axpy(0.5 * dt, &k1))?;
    let k3 = field(&state.axpy(0.5 * dt, &k2))?;
    let k4 = field(&state.axpy(dt, &k3))?;
    let mut out = state.axpy(dt / 6.0, &k1);
    out = out.axpy(dt / 3.0, &k2);
    out = out.axpy(dt / 3.0, &k3);
    out = out.axpy(dt / 6.0, &k4);
    if !out.is_finite() {
        return Err(Error::NonFinite("integrator state".into()));
    }
    Ok(out)
}

fn check_start(model: &ObjectiveModel, state: &HybridState, t_end: f64) -> Result<()> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(invalid(format!("final time must be positive, got {t_end}")));
    }
    if state.q.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: state.q.len() });
    }
    HybridState::new(state.q.clone(), state.p.clone(), state.tau)?;
    if !state.is_finite() {
        return Err(Error::NonFinite("initial state".into()));
    }
    Ok(())
}

fn converged(model: &ObjectiveModel, state: &HybridState) -> Result<bool> {
    Ok(model.gradient(&state.q)?.norm() <= GRADIENT_STOP)
}

/// Simulates `HHB(K)` from `z0` until flow time `t_end` or convergence.
///
/// Steps are shortened so the timer lands exactly on `T_`. Once `τ ≥ T_`, a
/// step that carries `⟨∇φ(q), p⟩` from `≤ 0` to `> 0` is bisected down to
/// `event_tol` in time; the state just past the crossing is reset.
pub fn integrate_hhb(model: &ObjectiveModel, params: &HybridParams, z0: &HybridState, t_end: f64) -> Result<HybridArc> {
    params.validate_hhb()?;
    check_start(model, z0, t_end)?;
    let field = |s: &HybridState| damped_field(s, model, params.k, 1.0);
    let mut arc = HybridArc::new(model.dim());
    let (mut t, mut j) = (0.0, 0usize);
    let mut z = z0.clone();
    arc.push(t, j, &z, energy(&z, model)?);

    loop {
        if z.tau >= params.t_min && switching_value(&z, model)? > 0.0 {
            z = jump_map(&z);
            j += 1;
            arc.log_jump(t, j, &z.q);
            arc.push(t, j, &z, energy(&z, model)?);
        }
        if t >= t_end || converged(model, &z)? {
            break;
        }
        let mut dt = params.step.min(t_end - t);
        if z.tau < params.t_min {
            dt = dt.min(params.t_min - z.tau);
        }
        let mut next = rk4(&z, dt, &field)?;
        if z.tau < params.t_min && next.tau >= params.t_min - 1e-15 * params.t_min.max(1.0) {
            next.tau = next.tau.max(params.t_min);
        }
        if z.tau >= params.t_min && switching_value(&next, model)? > 0.0 {
            let (mut lo, mut hi) = (0.0, dt);
            let mut iters = 0;
            while hi - lo > params.event_tol {
                if iters == MAX_EVENT_BISECTIONS {
                    return Err(Error::EventLocalization(MAX_EVENT_BISECTIONS));
                }
                let mid = 0.5 * (lo + hi);
                if switching_value(&rk4(&z, mid, &field)?, model)? > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
                iters += 1;
            }
            dt = hi;
            next = rk4(&z, dt, &field)?;
        }
        t += dt;
        z = next;
        arc.push(t, j, &z, energy(&z, model)?);
    }
    Ok(arc)
}

fn integrate_switched(
    model: &ObjectiveModel,
    x0: &HybridState,
    t_end: f64,
    step: f64,
    kappa: impl Fn(&HybridState) -> Result<f64>,
) -> Result<HybridArc> {
    check_start(model, x0, t_end)?;
    let field = |s: &HybridState| damped_field(s, model, kappa(s)?, 0.0);
    let mut arc = HybridArc::new(model.dim());
    let mut t = 0.0;
    let mut x = HybridState { tau: 0.0, ..x0.clone() };
    arc.push(t, 0, &x, energy(&x, model)?);
    while t < t_end && !converged(model, &x)? {
        let dt = step.min(t_end - t);
        x = rk4(&x, dt, &field)?;
        t += dt;
        arc.push(t, 0, &x, energy(&x, model)?);
    }
    Ok(arc)
}

/// Simulates `HiHB(K_, K̄)`; the damping is re-selected at every RK4 stage.
pub fn integrate_hihb(model: &ObjectiveModel, params: &HybridParams, x0: &HybridState, t_end: f64) -> Result<HybridArc> {
    params.validate_hihb()?;
    integrate_switched(model, x0, t_end, params.step, |s| kappa_select(s, params, model))
}

/// Simulates the plain heavy-ball flow `HB(K)`.
pub fn integrate_hb(model: &ObjectiveModel, k: f64, x0: &HybridState, t_end: f64, step: f64) -> Result<HybridArc> {
    if !(k >= 0.0) {
        return Err(invalid(format!("damping must be nonnegative, got {k}")));
    }
    if !(step > 0.0) {
        return Err(invalid(format!("integrator step must be positive, got {step}")));
    }
    integrate_switched(model, x0, t_end, step, |_| Ok(k))
}
