//! Discrete-time two-branch conditions.
//!
//! The iterations are written as a feedback loop `x_{k+1} = Âx_k + B̂u_k`,
//! `y_k = Ĉx_k`, `u_k = ∇φ(y_k)`, `ξ_k = Êx_k` on the stacked state
//! `x_k = (q_{k-1}, q_k)`. The momentum coefficient selects between a nominal
//! system (β̄) and a reset system (β_), switched on the sign of
//! `⟨∇φ(Ĉx), x₂ - x₁⟩`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    bisect_rate, rows, solve_with, BisectOutcome, Certificate, Direction, Discretization, LmiOptions, LmiOutcome,
    RateKind, VarLayout,
};
use crate::error::{invalid, Result};
use crate::linalg::{block2, block_diag, lifted, Mat};
use crate::sdp::{AffineMatrixMap, LmiBlock};

/// `(Â, B̂, Ĉ, Ê)` for one value of the momentum coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct LureMatrices {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub e: Mat,
}

/// Both branches of a switched discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct DtSystemMatrices {
    pub nominal: LureMatrices,
    pub reset: LureMatrices,
    pub discretization: Discretization,
    pub h: f64,
    pub beta_hi: f64,
    pub beta_lo: f64,
    pub n: usize,
}

/// One branch of the system for momentum coefficient `beta`.
pub fn build_dt(h: f64, beta: f64, discretization: Discretization, n: usize) -> Result<LureMatrices> {
    if !(h > 0.0) {
        return Err(invalid(format!("stepsize must be positive, got {h}")));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(invalid(format!("β must lie in [0, 1], got {beta}")));
    }
    let a = lifted(2, 2, &[0.0, 1.0, -beta, beta + 1.0], n);
    let b = lifted(2, 1, &[0.0, -h], n);
    let e = lifted(1, 2, &[0.0, 1.0], n);
    let c = match discretization {
        Discretization::Polyak => e.clone(),
        Discretization::Nesterov => lifted(1, 2, &[-beta, beta + 1.0], n),
    };
    Ok(LureMatrices { a, b, c, e })
}

impl DtSystemMatrices {
    pub fn new(
        h: f64,
        beta_hi: f64,
        beta_lo: f64,
        discretization: Discretization,
        n: usize,
    ) -> Result<Self> {
        if beta_lo > beta_hi {
            return Err(invalid(format!("need β_ ≤ β̄, got {beta_lo} > {beta_hi}")));
        }
        Ok(Self {
            nominal: build_dt(h, beta_hi, discretization, n)?,
            reset: build_dt(h, beta_lo, discretization, n)?,
            discretization,
            h,
            beta_hi,
            beta_lo,
            n,
        })
    }
}

/// Matrices of one branch: `M_P` as an affine map of `P`, and the fixed
/// `Σ₁, Σ₂, N₁, N₂, N₃, M₁, M₂, M₃`.
#[derive(Debug, Clone)]
pub struct BranchStack {
    /// `M_P` for each element of the symmetric basis of `P` (same ordering as
    /// [`crate::linalg::sym_basis`]).
    pub m_p_basis: Vec<Mat>,
    pub sigma1: Mat,
    pub sigma2: Mat,
    pub n1: Mat,
    pub n2: Mat,
    pub n3: Mat,
    pub m1: Mat,
    pub m2: Mat,
    pub m3: Mat,
}

impl BranchStack {
    fn build(sys: &LureMatrices, mu: f64, lipschitz: f64, rho: f64, n: usize) -> Result<Self> {
        let zero_nn = Mat::zeros(n, n);
        let eye = Mat::identity(n, n);
        let upper = lifted(2, 2, &[lipschitz / 2.0, 0.5, 0.5, 0.0], n);
        let lower = lifted(2, 2, &[-mu / 2.0, 0.5, 0.5, 0.0], n);

        let sigma1 = block2(&(&sys.e * &sys.a - &sys.c), &(&sys.e * &sys.b), &Mat::zeros(n, 2 * n), &eye);
        let sigma2 = block2(&(&sys.c - &sys.e), &zero_nn, &Mat::zeros(n, 2 * n), &eye);
        let c_lift = block_diag(&sys.c, &eye);

        let n1 = sigma1.transpose() * &upper * &sigma1;
        let n2 = sigma2.transpose() * &lower * &sigma2;
        let n3 = c_lift.transpose() * &lower * &c_lift;
        let m1 = &n1 + &n2;
        let m2 = &n1 + &n3;
        let sector = super::build_sector(mu, lipschitz, n)?;
        let m3 = c_lift.transpose() * &sector.matrix * &c_lift;

        let g = {
            let mut g = Mat::zeros(2 * n, 3 * n);
            g.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&sys.a);
            g.view_mut((0, 2 * n), (2 * n, n)).copy_from(&sys.b);
            g
        };
        let m_p_basis = crate::linalg::sym_basis(2 * n)
            .into_iter()
            .map(|(_, e)| {
                let mut m = g.transpose() * &e * &g;
                let mut top = m.view_mut((0, 0), (2 * n, 2 * n));
                top -= &e * (rho * rho);
                m
            })
            .collect();
        Ok(Self { m_p_basis, sigma1, sigma2, n1, n2, n3, m1, m2, m3 })
    }

    /// `M_P` evaluated at a concrete `P`.
    pub fn m_p(&self, p: &Mat) -> Mat {
        let d = p.nrows();
        let mut out = Mat::zeros(self.m1.nrows(), self.m1.ncols());
        let mut k = 0;
        for i in 0..d {
            for j in i..d {
                out += &self.m_p_basis[k] * p[(i, j)];
                k += 1;
            }
        }
        out
    }
}

/// The complete two-branch stack at a fixed rate `ρ`.
#[derive(Debug, Clone)]
pub struct DtLmiData {
    pub system: DtSystemMatrices,
    pub mu: f64,
    pub lipschitz: f64,
    pub rho: f64,
    pub nominal: BranchStack,
    pub reset: BranchStack,
    /// Region multiplier: `eᵀMe = -⟨u - u*, x₂ - x₁⟩`.
    pub m: Mat,
}

/// The ±½ switching-region matrix of size `3n`.
pub fn region_matrix(n: usize) -> Mat {
    lifted(3, 3, &[0.0, 0.0, 0.5, 0.0, 0.0, -0.5, 0.5, -0.5, 0.0], n)
}

pub fn build_theorem2(sys: &DtSystemMatrices, mu: f64, lipschitz: f64, rho: f64) -> Result<DtLmiData> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(invalid(format!("ρ must lie in (0, 1], got {rho}")));
    }
    if !(mu > 0.0 && mu <= lipschitz) {
        return Err(invalid(format!("need 0 < μ ≤ L, got μ = {mu}, L = {lipschitz}")));
    }
    let n = sys.n;
    Ok(DtLmiData {
        system: sys.clone(),
        mu,
        lipschitz,
        rho,
        nominal: BranchStack::build(&sys.nominal, mu, lipschitz, rho, n)?,
        reset: BranchStack::build(&sys.reset, mu, lipschitz, rho, n)?,
        m: region_matrix(n),
    })
}

const MULTIPLIERS: [&str; 5] = ["a", "lambda", "lambda_r", "sigma", "sigma_r"];

impl DtLmiData {
    fn branch_block(&self, layout: &VarLayout, branch: &BranchStack, lambda: &str, sigma: &str, sign: f64) -> AffineMatrixMap {
        let r2 = self.rho * self.rho;
        let mut map = AffineMatrixMap::zero(branch.m1.nrows());
        for (k, m) in branch.m_p_basis.iter().enumerate() {
            map.add_term(k, m, 1.0);
        }
        map.add_term(layout.mult("a"), &(&branch.m1 * r2 + &branch.m2 * (1.0 - r2)), 1.0);
        map.add_term(layout.mult(lambda), &branch.m3, 1.0);
        map.add_term(layout.mult(sigma), &self.m, sign);
        map
    }

    /// Left-hand sides of both LMIs at a concrete assignment.
    pub fn evaluate(&self, p: &Mat, mult: &BTreeMap<String, f64>) -> (Mat, Mat) {
        let r2 = self.rho * self.rho;
        let get = |k: &str| mult[k];
        let lhs = |b: &BranchStack, lam: f64, sig: f64| {
            b.m_p(p) + (&b.m1 * r2 + &b.m2 * (1.0 - r2)) * get("a") + &b.m3 * lam + &self.m * sig
        };
        (
            lhs(&self.nominal, get("lambda"), get("sigma")),
            lhs(&self.reset, get("lambda_r"), -get("sigma_r")),
        )
    }
}

/// Poses both LMIs (with `P ≻ 0` and positive multipliers) to the engine.
pub fn dt_feasible(data: &DtLmiData, opts: &LmiOptions) -> Result<LmiOutcome> {
    let layout = VarLayout::new(2 * data.system.n, &MULTIPLIERS);
    let blocks = vec![
        LmiBlock::strict("nominal", data.branch_block(&layout, &data.nominal, "lambda", "sigma", 1.0)),
        LmiBlock::strict("reset", data.branch_block(&layout, &data.reset, "lambda_r", "sigma_r", -1.0)),
    ];
    let problem = layout.problem(blocks, opts);
    let sys = &data.system;
    solve_with(problem, opts, |v, worst| Certificate {
        rate: data.rho,
        rate_kind: RateKind::Rho,
        p: rows(&layout.p_from(v)),
        multipliers: layout.multipliers_from(v),
        margin: worst,
        tuning: dt_tuning(sys, data.mu, data.lipschitz),
    })
}

pub(crate) fn dt_tuning(sys: &DtSystemMatrices, mu: f64, lipschitz: f64) -> BTreeMap<String, f64> {
    let mut t = BTreeMap::new();
    t.insert("h".into(), sys.h);
    t.insert("beta_hi".into(), sys.beta_hi);
    t.insert("beta_lo".into(), sys.beta_lo);
    t.insert("mu".into(), mu);
    t.insert("L".into(), lipschitz);
    t.insert(
        "nesterov_form".into(),
        if sys.discretization == Discretization::Nesterov { 1.0 } else { 0.0 },
    );
    t
}

/// Lower end of every `ρ` search.
pub const RHO_LO: f64 = 1e-3;

/// A certification request; all LMI work happens at `n = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtRequest {
    pub n: usize,
    pub h: f64,
    pub beta_hi: f64,
    pub beta_lo: f64,
    pub discretization: Discretization,
    pub mu: f64,
    pub lipschitz: f64,
}

/// The block structure `X ⊗ I_n` of every matrix makes the LMIs at dimension
/// `n` equivalent to the scalar ones; certificates lift via `P ⊗ I_n`.
pub fn reduce_to_scalar(req: &DtRequest) -> DtRequest {
    DtRequest { n: 1, ..*req }
}

impl DtRequest {
    pub fn system(&self) -> Result<DtSystemMatrices> {
        DtSystemMatrices::new(self.h, self.beta_hi, self.beta_lo, self.discretization, self.n)
    }

    /// Feasibility of the two-branch LMI at rate `rho`, solved at `n = 1`.
    pub fn probe(&self, rho: f64, opts: &LmiOptions) -> Result<LmiOutcome> {
        let scalar = reduce_to_scalar(self);
        let data = build_theorem2(&scalar.system()?, self.mu, self.lipschitz, rho)?;
        dt_feasible(&data, opts)
    }

    /// Smallest certifiable `ρ ∈ [RHO_LO, 1]` by bisection.
    pub fn certify(&self, iters: usize, opts: &LmiOptions) -> Result<BisectOutcome> {
        bisect_rate(|rho| self.probe(rho, opts), RHO_LO, 1.0, iters, Direction::FeasibleAbove)
    }
}
