//! Trajectory audit of discrete-time certificates.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{Certificate, RateKind};
use crate::discrete::{step, AlgoParams, IterState};
use crate::error::{invalid, Error, Result};
use crate::objectives::ObjectiveModel;

/// Worst observed behaviour of `V_k` and of the rate bound along one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    /// Iterations compared; fewer than requested when the run reached the
    /// underflow range first.
    pub steps: usize,
    /// `max_k (V_{k+1} − V_k) / V_0`.
    pub max_v_increase: f64,
    /// `max_k (φ(ξ_k) − φ*) / (c·ρ^{2k})`.
    pub max_bound_ratio: f64,
    pub c: f64,
}

impl AuditReport {
    pub fn v_nonincreasing(&self, slack: f64) -> bool {
        self.max_v_increase <= slack
    }

    pub fn bound_holds(&self, rel_slack: f64) -> bool {
        self.max_bound_ratio <= 1.0 + rel_slack
    }

    /// Worst-case combination of two reports.
    pub fn merge(self, other: Self) -> Self {
        Self {
            steps: self.steps.max(other.steps),
            max_v_increase: self.max_v_increase.max(other.max_v_increase),
            max_bound_ratio: self.max_bound_ratio.max(other.max_bound_ratio),
            c: self.c.max(other.c),
        }
    }
}

/// Below this, products of iterate entries lose relative precision to
/// gradual underflow and the comparison says nothing about the certificate.
pub const UNDERFLOW_GUARD: f64 = f64::MIN_POSITIVE / f64::EPSILON;

/// Runs `params` from `q0` (zero momentum) for `steps` iterations and compares
/// the trajectory against the certificate.
///
/// Everything is evaluated relative to `V_0` in the log domain, so long runs
/// with small `ρ` do not underflow. The audit stops early once `V_k` or the
/// gap falls below [`UNDERFLOW_GUARD`].
pub fn audit_certificate(
    cert: &Certificate,
    model: &ObjectiveModel,
    params: &AlgoParams,
    q0: &DVector<f64>,
    steps: usize,
) -> Result<AuditReport> {
    if cert.rate_kind != RateKind::Rho {
        return Err(invalid("only discrete-time certificates can be audited along iterations"));
    }
    let a = cert.multiplier("a").ok_or_else(|| invalid("certificate lacks the multiplier `a`"))?;
    let q_star = model.minimizer.clone().ok_or(Error::MissingOptimum)?;
    let n = q_star.len();
    let x_star = DVector::from_fn(2 * n, |i, _| q_star[i % n]);
    let ln_rho = cert.rate.ln();

    let mut state = IterState::new(q0.clone(), None, params.eps)?;
    let w_of = |s: &IterState| -> Result<(f64, f64)> {
        let gap = model.gap(&s.q)?;
        Ok((cert.unweighted_lyapunov(&(s.stacked() - &x_star), gap), gap))
    };
    let (w0, gap0) = w_of(&state)?;
    if !(w0 > 0.0) {
        return Err(invalid("initial point is the minimizer; nothing to audit"));
    }
    let c = w0 / a;
    let ln_w0 = w0.ln();
    let ln_c = c.ln();
    // V_k / V_0 and gap_k / (c ρ^{2k})
    let rel_v = |w: f64, k: usize| if w > 0.0 { (w.ln() - ln_w0 - 2.0 * k as f64 * ln_rho).exp() } else { 0.0 };
    let ratio = |gap: f64, k: usize| if gap > 0.0 { (gap.ln() - ln_c - 2.0 * k as f64 * ln_rho).exp() } else { 0.0 };

    let mut v_prev = 1.0;
    let mut report = AuditReport { steps: 0, max_v_increase: f64::NEG_INFINITY, max_bound_ratio: ratio(gap0, 0), c };
    for k in 1..=steps {
        state = step(&state, params, model)?.state;
        let (w, gap) = w_of(&state)?;
        if !w.is_finite() {
            return Err(Error::NonFinite(format!("Lyapunov value at iteration {k}")));
        }
        if w < UNDERFLOW_GUARD || gap < UNDERFLOW_GUARD {
            break;
        }
        let v = rel_v(w, k);
        report.max_v_increase = report.max_v_increase.max(v - v_prev);
        report.max_bound_ratio = report.max_bound_ratio.max(ratio(gap, k));
        v_prev = v;
        report.steps = k;
    }
    Ok(report)
}
