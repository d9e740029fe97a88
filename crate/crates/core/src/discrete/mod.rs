//! Discrete-time heavy-ball iterations with momentum reset.
//!
//! All momentum variants share the two-step form
//! `q_{k+1} = q_k + ε[β p_k − ε∇φ(·)]`, `p_{k+1} = (q_{k+1} − q_k)/ε`,
//! with `h = ε²`. The coefficient `β` switches between `β̄` (momentum aligned
//! with descent) and `β_` (reset) on the sign of `⟨∇φ(q_k), p_k⟩`.

mod trajectory;

pub use trajectory::{count_nonmonotone, count_nonmonotone_above, run, run_from, IterRecord, RunStatus, Trajectory};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::objectives::ObjectiveModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Variant {
    /// Gradient at the current iterate.
    Pol,
    /// Gradient at the extrapolated point `q_k + εβp_k`.
    Nes,
    /// Plain gradient descent with stepsize `h`.
    Gd,
    /// Nesterov form with the time-varying `β` schedule and no switching.
    NesSchedule,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgoParams {
    pub eps: f64,
    pub h: f64,
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub variant: Variant,
}

impl AlgoParams {
    pub fn new(eps: f64, beta_lo: f64, beta_hi: f64, variant: Variant) -> Result<Self> {
        let p = Self { eps, h: eps * eps, beta_lo, beta_hi, variant };
        p.validate()?;
        Ok(p)
    }

    /// Parameters from a stepsize `h`, with `ε = √h`.
    pub fn from_stepsize(h: f64, beta_lo: f64, beta_hi: f64, variant: Variant) -> Result<Self> {
        if !(h >= 0.0) {
            return Err(invalid(format!("stepsize must be nonnegative, got {h}")));
        }
        Self::new(h.sqrt(), beta_lo, beta_hi, variant)
    }

    /// Time-invariant heavy ball: `β_ = β̄ = 1 − εK`.
    pub fn heavy_ball(eps: f64, k: f64, variant: Variant) -> Result<Self> {
        let beta = 1.0 - eps * k;
        Self::new(eps, beta, beta, variant)
    }

    /// Hard reset: `β_ = 0`, `β̄ = 1 − εK`.
    pub fn hhb(eps: f64, k: f64, variant: Variant) -> Result<Self> {
        Self::new(eps, 0.0, 1.0 - eps * k, variant)
    }

    /// Switched damping: `β̄ = 1 − εK_`, `β_ = 1 − εK̄`.
    pub fn hihb(eps: f64, k_lo: f64, k_hi: f64, variant: Variant) -> Result<Self> {
        Self::new(eps, 1.0 - eps * k_hi, 1.0 - eps * k_lo, variant)
    }

    pub fn gradient_descent(h: f64) -> Result<Self> {
        Self::from_stepsize(h, 0.0, 0.0, Variant::Gd)
    }

    pub fn nesterov_schedule(h: f64) -> Result<Self> {
        Self::from_stepsize(h, 0.0, 0.0, Variant::NesSchedule)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(invalid(format!("ε must be finite and nonnegative, got {}", self.eps)));
        }
        if self.h != self.eps * self.eps {
            return Err(invalid(format!("h = {} differs from ε² = {}", self.h, self.eps * self.eps)));
        }
        if self.variant != Variant::Gd && self.variant != Variant::NesSchedule {
            if !(self.eps > 0.0) {
                return Err(invalid("momentum methods need ε > 0"));
            }
            if !(0.0 <= self.beta_lo && self.beta_lo <= self.beta_hi && self.beta_hi <= 1.0) {
                return Err(invalid(format!(
                    "need 0 ≤ β_ ≤ β̄ ≤ 1, got β_ = {}, β̄ = {}",
                    self.beta_lo, self.beta_hi
                )));
            }
        }
        Ok(())
    }
}

/// Two-point state `x_k = (q_{k−1}, q_k)` with `p_k = (q_k − q_{k−1})/ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterState {
    pub q_prev: DVector<f64>,
    pub q: DVector<f64>,
    pub p: DVector<f64>,
    pub k: usize,
    /// Schedule state `α_k` (used only by the scheduled Nesterov variant).
    pub alpha: f64,
}

impl IterState {
    /// Start at `q0` with momentum `p0` (zero when absent).
    pub fn new(q0: DVector<f64>, p0: Option<DVector<f64>>, eps: f64) -> Result<Self> {
        let p = p0.unwrap_or_else(|| DVector::zeros(q0.len()));
        if p.len() != q0.len() {
            return Err(Error::DimensionMismatch { expected: q0.len(), got: p.len() });
        }
        Ok(Self { q_prev: &q0 - &p * eps, q: q0, p, k: 0, alpha: 1.0 })
    }

    fn advance(&self, q_next: DVector<f64>, eps: f64, alpha: f64) -> Self {
        let p = if eps > 0.0 { (&q_next - &self.q) / eps } else { DVector::zeros(q_next.len()) };
        Self { q_prev: self.q.clone(), q: q_next, p, k: self.k + 1, alpha }
    }

    /// Stacked `(q_{k−1}, q_k)`.
    pub fn stacked(&self) -> DVector<f64> {
        let n = self.q.len();
        DVector::from_fn(2 * n, |i, _| if i < n { self.q_prev[i] } else { self.q[i - n] })
    }
}

/// What one step did.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: IterState,
    /// Momentum coefficient used; `None` for gradient descent.
    pub beta: Option<f64>,
    pub reset: bool,
}

/// `β̄` if `⟨grad, p⟩ < 0`, otherwise the reset value `β_`.
pub fn switching_beta(grad: &DVector<f64>, p: &DVector<f64>, params: &AlgoParams) -> (f64, bool) {
    if grad.dot(p) < 0.0 {
        (params.beta_hi, false)
    } else {
        (params.beta_lo, true)
    }
}

fn finite_grad(model: &ObjectiveModel, q: &DVector<f64>) -> Result<DVector<f64>> {
    let g = model.gradient(q)?;
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("gradient at iterate (norm of point {:.3e})", q.norm())));
    }
    Ok(g)
}

/// Polyak form: gradient at `q_k`.
pub fn step_pol(state: &IterState, params: &AlgoParams, model: &ObjectiveModel) -> Result<Step> {
    let g = finite_grad(model, &state.q)?;
    let (beta, reset) = switching_beta(&g, &state.p, params);
    let eps = params.eps;
    let q_next = &state.q + (&state.p * beta - &g * eps) * eps;
    Ok(Step { state: state.advance(q_next, eps, state.alpha), beta: Some(beta), reset })
}

/// Nesterov form: gradient at the extrapolated point `q_k + εβp_k`.
pub fn step_nes(state: &IterState, params: &AlgoParams, model: &ObjectiveModel) -> Result<Step> {
    let eps = params.eps;
    let (beta, reset, alpha) = match params.variant {
        Variant::NesSchedule => {
            let (beta, alpha_next) = nesterov_beta_schedule(state.alpha)?;
            (beta, false, alpha_next)
        }
        _ => {
            let g = finite_grad(model, &state.q)?;
            let (beta, reset) = switching_beta(&g, &state.p, params);
            (beta, reset, state.alpha)
        }
    };
    let y = &state.q + &state.p * (eps * beta);
    let g = finite_grad(model, &y)?;
    let q_next = &state.q + (&state.p * beta - &g * eps) * eps;
    Ok(Step { state: state.advance(q_next, eps, alpha), beta: Some(beta), reset })
}

/// `q_{k+1} = q_k − h∇φ(q_k)`.
pub fn step_gd(state: &IterState, params: &AlgoParams, model: &ObjectiveModel) -> Result<Step> {
    let g = finite_grad(model, &state.q)?;
    let q_next = &state.q - &g * params.h;
    Ok(Step { state: state.advance(q_next, params.eps, state.alpha), beta: None, reset: false })
}

/// One step of whichever variant `params` selects.
pub fn step(state: &IterState, params: &AlgoParams, model: &ObjectiveModel) -> Result<Step> {
    match params.variant {
        Variant::Pol => step_pol(state, params, model),
        Variant::Nes | Variant::NesSchedule => step_nes(state, params, model),
        Variant::Gd => step_gd(state, params, model),
    }
}

/// Next momentum coefficient of the accelerated schedule:
/// `α_{k+1}² = (1 − α_{k+1})α_k²`, `β = α_k(1 − α_k)/(α_k² + α_{k+1})`.
pub fn nesterov_beta_schedule(alpha_prev: f64) -> Result<(f64, f64)> {
    if !(alpha_prev > 0.0 && alpha_prev <= 1.0) {
        return Err(invalid(format!("α must lie in (0, 1], got {alpha_prev}")));
    }
    let a2 = alpha_prev * alpha_prev;
    let alpha_next = 0.5 * (-a2 + (a2 * a2 + 4.0 * a2).sqrt());
    let beta = alpha_prev * (1.0 - alpha_prev) / (a2 + alpha_next);
    Ok((beta, alpha_next))
}

/// Iterator over successive steps from a starting state.
pub struct Iterates<'a> {
    state: IterState,
    params: AlgoParams,
    model: &'a ObjectiveModel,
}

impl<'a> Iterates<'a> {
    pub fn new(model: &'a ObjectiveModel, params: AlgoParams, state: IterState) -> Self {
        Self { state, params, model }
    }
}

impl Iterator for Iterates<'_> {
    type Item = Result<Step>;

    fn next(&mut self) -> Option<Self::Item> {
        let out = step(&self.state, &self.params, self.model);
        if let Ok(s) = &out {
            self.state = s.state.clone();
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::QuadraticSpec;
    use nalgebra::DMatrix;

    fn scalar_model(c: f64) -> ObjectiveModel {
        QuadraticSpec::new(DMatrix::from_element(1, 1, c), DVector::zeros(1))
            .unwrap()
            .into_model()
            .unwrap()
    }

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn params_validation() {
        assert!(AlgoParams::new(0.1, 0.5, 0.4, Variant::Pol).is_err());
        assert!(AlgoParams::new(0.1, -0.1, 0.4, Variant::Pol).is_err());
        assert!(AlgoParams::new(0.1, 0.1, 1.1, Variant::Nes).is_err());
        assert!(AlgoParams::gradient_descent(0.0).is_ok());
        let p = AlgoParams::hihb(0.1, 1.0, 3.0, Variant::Pol).unwrap();
        assert!((p.beta_hi - 0.9).abs() < 1e-15 && (p.beta_lo - 0.7).abs() < 1e-15);
        let mut bad = p;
        bad.h = 0.5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_momentum_takes_reset_branch() {
        let p = AlgoParams::new(0.1, 0.2, 0.8, Variant::Pol).unwrap();
        assert_eq!(switching_beta(&v(&[1.0, 2.0]), &v(&[0.0, 0.0]), &p), (0.2, true));
        assert_eq!(switching_beta(&v(&[1.0, 0.0]), &v(&[-1.0, 0.0]), &p), (0.8, false));
        let same = AlgoParams::new(0.1, 0.5, 0.5, Variant::Pol).unwrap();
        for (g, m) in [(1.0, 1.0), (1.0, -1.0), (0.0, 0.0)] {
            assert_eq!(switching_beta(&v(&[g]), &v(&[m]), &same).0, 0.5);
        }
    }

    #[test]
    fn polyak_hand_iterate() {
        let model = scalar_model(1.0);
        let p = AlgoParams::new(0.1, 0.3, 0.9, Variant::Pol).unwrap();
        let s0 = IterState::new(v(&[1.0]), None, 0.1).unwrap();
        let s = step_pol(&s0, &p, &model).unwrap();
        assert!((s.state.q[0] - 0.99).abs() < 1e-15);
        assert!((s.state.p[0] + 0.1).abs() < 1e-13);
        assert!(s.reset);
    }

    #[test]
    fn equilibrium_is_fixed() {
        let model = scalar_model(2.0);
        let p = AlgoParams::new(0.3, 0.1, 0.9, Variant::Pol).unwrap();
        let s0 = IterState::new(v(&[0.0]), None, 0.3).unwrap();
        for f in [step_pol, step_nes, step_gd] {
            assert_eq!(f(&s0, &p, &model).unwrap().state.q, s0.q);
        }
    }

    #[test]
    fn nesterov_matches_polyak_at_zero_momentum() {
        let (_, model) = crate::objectives::gen_random_quadratic(4, 30.0, 2).unwrap();
        let pol = AlgoParams::new(0.1, 0.4, 0.9, Variant::Pol).unwrap();
        let nes = AlgoParams { variant: Variant::Nes, ..pol };
        let s0 = IterState::new(v(&[1.0, -2.0, 3.0, 0.5]), None, 0.1).unwrap();
        assert_eq!(step_pol(&s0, &pol, &model).unwrap().state, step_nes(&s0, &nes, &model).unwrap().state);
    }

    #[test]
    fn hhb_nesterov_reset_is_gradient_step() {
        let (_, model) = crate::objectives::gen_random_quadratic(3, 10.0, 4).unwrap();
        let p = AlgoParams::hhb(0.2, 1.0, Variant::Nes).unwrap();
        // momentum aligned with the gradient forces the reset branch
        let q = v(&[1.0, 1.0, 1.0]);
        let g = model.gradient(&q).unwrap();
        let s0 = IterState::new(q.clone(), Some(g.clone()), 0.2).unwrap();
        let s = step_nes(&s0, &p, &model).unwrap();
        assert!(s.reset);
        assert_eq!(s.state.q, &q + (&s0.p * 0.0 - &g * 0.2) * 0.2);
        assert!((&s.state.q - (&q - &g * p.h)).amax() < 1e-13);
    }

    #[test]
    fn gradient_descent_cases() {
        let model = scalar_model(1.0);
        let p = AlgoParams::gradient_descent(1.0).unwrap();
        let s0 = IterState::new(v(&[1.0]), None, 1.0).unwrap();
        assert_eq!(step_gd(&s0, &p, &model).unwrap().state.q[0], 0.0);
        let still = AlgoParams::gradient_descent(0.0).unwrap();
        let s = step_gd(&s0, &still, &model).unwrap();
        assert_eq!(s.state.q, s0.q);
        assert_eq!(s.state.p, DVector::zeros(1));
    }

    #[test]
    fn schedule_values() {
        let (beta, a1) = nesterov_beta_schedule(1.0).unwrap();
        assert_eq!(beta, 0.0);
        assert!((a1 - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
        let mut a = 1.0;
        for _ in 0..200 {
            let (_, next) = nesterov_beta_schedule(a).unwrap();
            assert!(next < a && next > 0.0);
            assert!((next * next - (1.0 - next) * a * a).abs() <= 1e-12);
            a = next;
        }
        let (_, tiny) = nesterov_beta_schedule(1e-9).unwrap();
        assert!(tiny > 0.0 && tiny < 1e-9);
        assert!(nesterov_beta_schedule(0.0).is_err());
        assert!(nesterov_beta_schedule(1.5).is_err());
    }

    #[test]
    fn momentum_convention_holds_every_step() {
        let (_, model) = crate::objectives::gen_random_quadratic(5, 50.0, 8).unwrap();
        let q0 = DVector::from_fn(5, |i, _| (i as f64) - 2.0);
        for params in [
            AlgoParams::hhb(0.1, 1.0, Variant::Pol).unwrap(),
            AlgoParams::hihb(0.1, 0.5, 4.0, Variant::Nes).unwrap(),
            AlgoParams::nesterov_schedule(0.01).unwrap(),
            AlgoParams::gradient_descent(0.01).unwrap(),
        ] {
            let s0 = IterState::new(q0.clone(), None, params.eps).unwrap();
            for s in Iterates::new(&model, params, s0).take(200) {
                let st = s.unwrap().state;
                let lhs = &st.p * params.eps;
                let rhs = &st.q - &st.q_prev;
                assert!((lhs - &rhs).amax() <= 1e-12 * rhs.amax().max(st.q.amax()).max(1e-300));
            }
        }
    }

    #[test]
    fn non_finite_gradient_is_an_error() {
        let model = scalar_model(1.0);
        let p = AlgoParams::new(0.1, 0.5, 0.5, Variant::Pol).unwrap();
        let s0 = IterState::new(v(&[f64::INFINITY]), None, 0.1).unwrap();
        assert!(matches!(step_pol(&s0, &p, &model), Err(Error::NonFinite(_))));
    }
}
