//! Objective functions with gradient, curvature metadata and optimum.

mod logistic;
mod quadratic;

pub use logistic::{gen_logistic_dataset, logistic_eval_grad, logistic_model, solve_logistic_reference, LogisticSpec};
pub use quadratic::{gen_random_quadratic, quad_eval_grad, QuadraticSpec};

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{invalid, Error, Result};

/// A differentiable objective `φ: Rⁿ → R`.
pub trait Objective: Debug + Send + Sync {
    fn dim(&self) -> usize;

    fn eval_grad(&self, q: &DVector<f64>) -> Result<(f64, DVector<f64>)>;

    fn value(&self, q: &DVector<f64>) -> Result<f64> {
        Ok(self.eval_grad(q)?.0)
    }

    fn gradient(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.eval_grad(q)?.1)
    }

    /// `φ(q) − φ(q*)` computed without cancellation, when the structure allows.
    fn exact_gap(&self, _q: &DVector<f64>, _minimizer: &DVector<f64>) -> Option<f64> {
        None
    }
}

/// An objective together with its `(μ, L)` constants and, when known, its
/// minimizer and minimum value. `μ = 0` means "unknown".
#[derive(Debug, Clone)]
pub struct ObjectiveModel {
    pub objective: Arc<dyn Objective>,
    pub mu: f64,
    pub lipschitz: f64,
    pub minimizer: Option<DVector<f64>>,
    pub min_value: Option<f64>,
}

impl ObjectiveModel {
    pub fn new(objective: Arc<dyn Objective>, mu: f64, lipschitz: f64) -> Result<Self> {
        if !(lipschitz > 0.0) || !(mu >= 0.0) || mu > lipschitz {
            return Err(invalid(format!("need 0 ≤ μ ≤ L and L > 0, got μ = {mu}, L = {lipschitz}")));
        }
        Ok(Self { objective, mu, lipschitz, minimizer: None, min_value: None })
    }

    /// Attaches `q*`, checking that the gradient vanishes there.
    pub fn with_minimizer(mut self, q_star: DVector<f64>) -> Result<Self> {
        let (value, grad) = self.objective.eval_grad(&q_star)?;
        let tol = 1e-8 * q_star.norm().max(1.0);
        if grad.norm() > tol {
            return Err(invalid(format!("gradient norm {:.3e} at the claimed minimizer exceeds {tol:.3e}", grad.norm())));
        }
        self.minimizer = Some(q_star);
        self.min_value = Some(value);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn value(&self, q: &DVector<f64>) -> Result<f64> {
        self.objective.value(q)
    }

    pub fn gradient(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        self.objective.gradient(q)
    }

    pub fn eval_grad(&self, q: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        self.objective.eval_grad(q)
    }

    /// `φ(q) − φ*`.
    pub fn gap(&self, q: &DVector<f64>) -> Result<f64> {
        let (Some(q_star), Some(phi_star)) = (&self.minimizer, self.min_value) else {
            return Err(Error::MissingOptimum);
        };
        if let Some(g) = self.objective.exact_gap(q, q_star) {
            return Ok(g);
        }
        Ok(self.value(q)? - phi_star)
    }
}

/// Largest coordinate-wise error between the analytic gradient and central
/// differences with step `step`, relative to `max(|∂ᵢφ|, 1)`.
pub fn finite_diff_check(model: &ObjectiveModel, q: &DVector<f64>, step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(invalid(format!("finite-difference step must be positive, got {step}")));
    }
    let grad = model.gradient(q)?;
    let mut worst: f64 = 0.0;
    let mut probe = q.clone();
    for i in 0..q.len() {
        probe[i] = q[i] + step;
        let fp = model.value(&probe)?;
        probe[i] = q[i] - step;
        let fm = model.value(&probe)?;
        probe[i] = q[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite(format!("objective at probe point along coordinate {i}")));
        }
        let fd = (fp - fm) / (2.0 * step);
        worst = worst.max((grad[i] - fd).abs() / grad[i].abs().max(1.0));
    }
    Ok(worst)
}

pub(crate) fn check_dim(expected: usize, q: &DVector<f64>) -> Result<()> {
    if q.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: q.len() });
    }
    Ok(())
}
