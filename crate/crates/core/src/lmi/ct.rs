//! Continuous-time conditions for the hybrid heavy-ball flow.
//!
//! The plant `ẋ = Ax + Bu`, `u = ∇φ(Cx)` with jumps `x⁺ = A_R x` is certified
//! by a quadratic `V(x̃) = x̃ᵀPx̃` decreasing at rate `2α` on an inflated flow
//! set and non-increasing across jumps.
//!
//! The jump condition `M_J − σ₂M₀ ⪯ 0` has a zero diagonal entry in the
//! gradient coordinate, so it can never hold with a strictly negative margin;
//! it is posed as a non-strict block (`λ_max ≤ margin`).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{rows, solve_with, Certificate, LmiOptions, LmiOutcome, RateKind, VarLayout};
use crate::error::{invalid, Result};
use crate::linalg::{block_diag, lifted, sym_basis, Mat};
use crate::sdp::{symmetric_eig, AffineMatrixMap, LmiBlock};

/// Input matrix of the continuous-time plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CtInput {
    /// `B = [0; −I]`: the gradient enters the momentum equation only.
    AsWritten,
    /// `B = [−I; −I]`: experimental substitution that also feeds the gradient
    /// into the position equation.
    Substituted,
}

#[derive(Debug, Clone)]
pub struct CtLmiData {
    pub k: f64,
    pub n: usize,
    pub mu: f64,
    pub lipschitz: f64,
    pub input: CtInput,
    pub a: Mat,
    pub a_r: Mat,
    pub b: Mat,
    pub c: Mat,
    pub m_phi: Mat,
    pub m0: Mat,
}

pub fn build_ct(k: f64, n: usize, mu: f64, lipschitz: f64, input: CtInput) -> Result<CtLmiData> {
    if !(k > 0.0) {
        return Err(invalid(format!("damping must be positive, got {k}")));
    }
    if n == 0 {
        return Err(invalid("dimension must be positive"));
    }
    let a = lifted(2, 2, &[0.0, 1.0, 0.0, -k], n);
    let a_r = lifted(2, 2, &[1.0, 0.0, 0.0, 0.0], n);
    let b = match input {
        CtInput::AsWritten => lifted(2, 1, &[0.0, -1.0], n),
        CtInput::Substituted => lifted(2, 1, &[-1.0, -1.0], n),
    };
    let c = lifted(1, 2, &[1.0, 0.0], n);
    let c_lift = block_diag(&c, &Mat::identity(n, n));
    let sector = super::build_sector(mu, lipschitz, n)?;
    let m_phi = c_lift.transpose() * &sector.matrix * &c_lift;
    let m0 = m_eps_raw(0.0, n);
    Ok(CtLmiData { k, n, mu, lipschitz, input, a, a_r, b, c, m_phi, m0 })
}

fn m_eps_raw(eps: f64, n: usize) -> Mat {
    lifted(3, 3, &[eps, 0.0, 0.0, 0.0, eps, -0.5, 0.0, -0.5, 0.0], n)
}

const MULTIPLIERS: [&str; 3] = ["sigma_phi", "sigma1", "sigma2"];

impl CtLmiData {
    /// Inflation matrix: `eᵀM_εe = −pᵀu + ε|x̃|²`.
    pub fn m_eps(&self, eps: f64) -> Mat {
        m_eps_raw(eps, self.n)
    }

    /// `M_F` at a concrete `P` and rate `α`.
    pub fn m_flow(&self, p: &Mat, alpha: f64) -> Mat {
        let n = self.n;
        let mut m = Mat::zeros(3 * n, 3 * n);
        let pa = p * &self.a;
        let top = &pa + pa.transpose() + p * (2.0 * alpha);
        let pb = p * &self.b;
        m.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&top);
        m.view_mut((0, 2 * n), (2 * n, n)).copy_from(&pb);
        m.view_mut((2 * n, 0), (n, 2 * n)).copy_from(&pb.transpose());
        m
    }

    /// `M_J` at a concrete `P`.
    pub fn m_jump(&self, p: &Mat) -> Mat {
        let n = self.n;
        let mut m = Mat::zeros(3 * n, 3 * n);
        let top = self.a_r.transpose() * p * &self.a_r - p;
        m.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&top);
        m
    }

    /// Left-hand sides of the flow and jump inequalities.
    pub fn evaluate(&self, p: &Mat, alpha: f64, eps: f64, mult: &BTreeMap<String, f64>) -> (Mat, Mat) {
        let flow = self.m_flow(p, alpha) + &self.m_phi * mult["sigma_phi"] + self.m_eps(eps) * mult["sigma1"];
        let jump = self.m_jump(p) - &self.m0 * mult["sigma2"];
        (flow, jump)
    }
}

/// Poses the flow and jump inequalities at fixed `(α, ε)`; the certified
/// exponential rate is `α / cond(P)`.
pub fn ct_feasible(data: &CtLmiData, alpha: f64, eps_infl: f64, opts: &LmiOptions) -> Result<LmiOutcome> {
    if !(alpha > 0.0) || !(eps_infl > 0.0) {
        return Err(invalid(format!("need α, ε > 0, got α = {alpha}, ε = {eps_infl}")));
    }
    let n = data.n;
    let layout = VarLayout::new(2 * n, &MULTIPLIERS);
    let mut flow = AffineMatrixMap::zero(3 * n);
    let mut jump = AffineMatrixMap::zero(3 * n);
    for (k, (_, e)) in sym_basis(2 * n).iter().enumerate() {
        flow.add_term(k, &data.m_flow(e, alpha), 1.0);
        jump.add_term(k, &data.m_jump(e), 1.0);
    }
    flow.add_term(layout.mult("sigma_phi"), &data.m_phi, 1.0);
    flow.add_term(layout.mult("sigma1"), &data.m_eps(eps_infl), 1.0);
    jump.add_term(layout.mult("sigma2"), &data.m0, -1.0);
    let blocks = vec![LmiBlock::strict("flow", flow), LmiBlock::relaxed("jump", jump)];
    let problem = layout.problem(blocks, opts);
    solve_with(problem, opts, |v, worst| {
        let p = layout.p_from(v);
        let mut multipliers = layout.multipliers_from(v);
        multipliers.insert("eps".into(), eps_infl);
        let mut tuning = BTreeMap::new();
        tuning.insert("K".into(), data.k);
        tuning.insert("mu".into(), data.mu);
        tuning.insert("L".into(), data.lipschitz);
        tuning.insert("alpha".into(), alpha);
        tuning.insert("substituted_input".into(), if data.input == CtInput::Substituted { 1.0 } else { 0.0 });
        Certificate {
            rate: alpha / condition_number(&p),
            rate_kind: RateKind::Alpha,
            p: rows(&p),
            multipliers,
            margin: worst,
            tuning,
        }
    })
}

/// `λ_max(P) / λ_min(P)`; infinite for singular `P`.
pub fn condition_number(p: &Mat) -> f64 {
    match symmetric_eig(p) {
        Ok(eig) if eig.min() > 0.0 => eig.max() / eig.min(),
        _ => f64::INFINITY,
    }
}
