use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{step, AlgoParams, IterState};
use crate::error::{Error, Result};
use crate::objectives::ObjectiveModel;

const DIVERGENCE_FACTOR: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    MaxIter,
    Diverged,
}

/// Diagnostics of iterate `k`; `beta`/`reset` describe the step taken from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub k: usize,
    pub phi_gap: Option<f64>,
    /// Sign of `⟨∇φ(q_k), p_k⟩` as −1, 0 or +1.
    pub inner_sign: i8,
    pub beta: Option<f64>,
    pub reset: bool,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: AlgoParams,
    pub records: Vec<IterRecord>,
    pub status: RunStatus,
    pub final_state: IterState,
}

impl Trajectory {
    pub fn iterations(&self) -> usize {
        self.records.len() - 1
    }

    pub fn gaps(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.phi_gap).collect()
    }

    pub fn reset_count(&self) -> usize {
        self.records.iter().filter(|r| r.reset).count()
    }

    /// First iteration whose gap is at most `target`.
    pub fn first_below(&self, target: f64) -> Option<usize> {
        self.records.iter().find(|r| r.phi_gap.is_some_and(|g| g <= target)).map(|r| r.k)
    }

    /// CSV with columns `k, phi_gap, inner_sign, beta, reset, grad_norm`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,phi_gap,inner_sign,beta,reset,grad_norm\n");
        for r in &self.records {
            let opt = |x: Option<f64>| x.map(|v| format!("{v:.16e}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:.16e}",
                r.k,
                opt(r.phi_gap),
                r.inner_sign,
                opt(r.beta),
                u8::from(r.reset),
                r.grad_norm
            );
        }
        s
    }
}

/// Runs from `q0` with zero initial momentum.
pub fn run(model: &ObjectiveModel, params: &AlgoParams, q0: &DVector<f64>, max_iter: usize, grad_tol: f64) -> Result<Trajectory> {
    run_from(model, params, IterState::new(q0.clone(), None, params.eps)?, max_iter, grad_tol)
}

/// Iterates until `max_iter` steps, `‖∇φ(q_k)‖ ≤ grad_tol`, or divergence
/// (objective beyond `10¹²` times its initial scale, or non-finite).
pub fn run_from(model: &ObjectiveModel, params: &AlgoParams, start: IterState, max_iter: usize, grad_tol: f64) -> Result<Trajectory> {
    params.validate()?;
    let has_opt = model.minimizer.is_some() && model.min_value.is_some();
    let gap_of = |q: &DVector<f64>| -> Result<Option<f64>> { if has_opt { Ok(Some(model.gap(q)?)) } else { Ok(None) } };

    let mut state = start;
    let mut records = Vec::with_capacity(max_iter.min(1 << 20) + 1);
    let (v0, _) = model.eval_grad(&state.q)?;
    let scale0 = match gap_of(&state.q)? {
        Some(g) => g.abs(),
        None => v0.abs(),
    }
    .max(f64::MIN_POSITIVE);
    let mut status = RunStatus::MaxIter;

    loop {
        let (value, grad) = model.eval_grad(&state.q)?;
        let gap = gap_of(&state.q)?;
        let inner = grad.dot(&state.p);
        let grad_norm = grad.norm();
        let mut rec = IterRecord {
            k: state.k,
            phi_gap: gap,
            inner_sign: if inner > 0.0 { 1 } else if inner < 0.0 { -1 } else { 0 },
            beta: None,
            reset: false,
            grad_norm,
        };
        let size = gap.map(f64::abs).unwrap_or(value.abs());
        if !value.is_finite() || !grad_norm.is_finite() || size > DIVERGENCE_FACTOR * scale0 {
            records.push(rec);
            status = RunStatus::Diverged;
            break;
        }
        if grad_norm <= grad_tol {
            records.push(rec);
            status = RunStatus::Converged;
            break;
        }
        if records.len() == max_iter {
            records.push(rec);
            break;
        }
        let next = match step(&state, params, model) {
            Ok(s) => s,
            Err(Error::NonFinite(_)) => {
                records.push(rec);
                status = RunStatus::Diverged;
                break;
            }
            Err(e) => return Err(e),
        };
        rec.beta = next.beta;
        rec.reset = next.reset;
        records.push(rec);
        state = next.state;
    }
    Ok(Trajectory { params: *params, records, status, final_state: state })
}

/// Number of steps with `φ(q_{k+1}) > φ(q_k)`.
pub fn count_nonmonotone(traj: &Trajectory) -> Result<usize> {
    let gaps = traj.gaps().ok_or(Error::MissingOptimum)?;
    Ok(gaps.windows(2).filter(|w| w[1] > w[0]).count())
}

/// Like [`count_nonmonotone`], ignoring steps that start at or below
/// `floor`, where increases are rounding noise.
pub fn count_nonmonotone_above(traj: &Trajectory, floor: f64) -> Result<usize> {
    let gaps = traj.gaps().ok_or(Error::MissingOptimum)?;
    Ok(gaps.windows(2).filter(|w| w[0] > floor && w[1] > w[0]).count())
}
