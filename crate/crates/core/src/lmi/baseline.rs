//! Single-branch (time-invariant) rate LMI for scalar momentum iterations.
//!
//! The matrices are obtained by polarizing the scalar quadratic forms the
//! conditions encode, rather than by block algebra on system matrices. With
//! coordinates shifted so that `q* = 0`, `e = (q_{k-1}, q_k, u_k)`.

use nalgebra::DMatrix;

use super::dt::{dt_tuning, DtSystemMatrices, RHO_LO};
use super::{bisect_rate, BisectOutcome, Direction, rows, solve_with, Certificate, Discretization, LmiOptions, LmiOutcome, RateKind, VarLayout};
use crate::error::{invalid, Result};
use crate::sdp::{AffineMatrixMap, LmiBlock};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMethod {
    pub h: f64,
    pub beta: f64,
    pub discretization: Discretization,
}

impl ScalarMethod {
    fn next(&self, e: [f64; 3]) -> [f64; 2] {
        let [x1, x2, u] = e;
        [x2, x2 + self.beta * (x2 - x1) - self.h * u]
    }

    fn query_point(&self, e: [f64; 3]) -> f64 {
        let [x1, x2, _] = e;
        match self.discretization {
            Discretization::Polyak => x2,
            Discretization::Nesterov => x2 + self.beta * (x2 - x1),
        }
    }
}

/// Symmetric matrix of a quadratic form on R³ by polarization.
fn polarize(form: impl Fn([f64; 3]) -> f64) -> DMatrix<f64> {
    let unit = |i: usize| {
        let mut e = [0.0; 3];
        e[i] = 1.0;
        e
    };
    let mut m = DMatrix::zeros(3, 3);
    for i in 0..3 {
        m[(i, i)] = form(unit(i));
        for j in (i + 1)..3 {
            let mut s = unit(i);
            s[j] = 1.0;
            let v = 0.5 * (form(s) - form(unit(i)) - form(unit(j)));
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Matrices of the single-branch LMI at rate `rho`.
#[derive(Debug, Clone)]
pub struct BaselineStack {
    /// `x_{k+1}ᵀ E x_{k+1} - ρ² x_kᵀ E x_k` for `E` = basis of `P`.
    pub m_p_basis: Vec<DMatrix<f64>>,
    /// Function decrease bound `φ(ξ_{k+1}) - φ(ξ_k)`.
    pub m1: DMatrix<f64>,
    /// Suboptimality bound `φ(ξ_{k+1}) - φ*`.
    pub m2: DMatrix<f64>,
    /// Sector constraint on `(y_k, u_k)`.
    pub m3: DMatrix<f64>,
    pub rho: f64,
}

pub fn build_baseline(method: ScalarMethod, mu: f64, lipschitz: f64, rho: f64) -> Result<BaselineStack> {
    if !(mu > 0.0 && mu <= lipschitz) {
        return Err(invalid("need 0 < μ ≤ L"));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(invalid("ρ must lie in (0, 1]"));
    }
    let upper = move |e: [f64; 3]| {
        // L-smooth upper bound of φ(ξ_{k+1}) around y_k
        let d = method.next(e)[1] - method.query_point(e);
        0.5 * lipschitz * d * d + e[2] * d
    };
    let m1 = polarize(|e| {
        // strong convexity between y_k and ξ_k = q_k
        let d = method.query_point(e) - e[1];
        upper(e) - 0.5 * mu * d * d + e[2] * d
    });
    let m2 = polarize(|e| {
        let y = method.query_point(e);
        upper(e) - 0.5 * mu * y * y + e[2] * y
    });
    let m3 = polarize(|e| {
        let (y, u) = (method.query_point(e), e[2]);
        -mu * lipschitz / (mu + lipschitz) * y * y + y * u - u * u / (mu + lipschitz)
    });
    let quad2 = |p: [f64; 3], x: [f64; 2]| p[0] * x[0] * x[0] + 2.0 * p[1] * x[0] * x[1] + p[2] * x[1] * x[1];
    let m_p_basis = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        .into_iter()
        .map(|p| {
            polarize(|e| quad2(p, method.next(e)) - rho * rho * quad2(p, [e[0], e[1]]))
        })
        .collect();
    Ok(BaselineStack { m_p_basis, m1, m2, m3, rho })
}

/// `M_P + aρ²M₁ + a(1-ρ²)M₂ + λM₃ ⪯ 0` with `P ≻ 0`, `a, λ > 0`.
pub fn baseline_feasible(
    method: ScalarMethod,
    mu: f64,
    lipschitz: f64,
    rho: f64,
    opts: &LmiOptions,
) -> Result<LmiOutcome> {
    let stack = build_baseline(method, mu, lipschitz, rho)?;
    let layout = VarLayout::new(2, &["a", "lambda"]);
    let r2 = rho * rho;
    let mut map = AffineMatrixMap::zero(3);
    for (k, m) in stack.m_p_basis.iter().enumerate() {
        map.add_term(k, m, 1.0);
    }
    map.add_term(layout.mult("a"), &(&stack.m1 * r2 + &stack.m2 * (1.0 - r2)), 1.0);
    map.add_term(layout.mult("lambda"), &stack.m3, 1.0);
    let problem = layout.problem(vec![LmiBlock::strict("lmi", map)], opts);
    let sys = DtSystemMatrices::new(method.h, method.beta, method.beta, method.discretization, 1)?;
    solve_with(problem, opts, |v, worst| Certificate {
        rate: rho,
        rate_kind: RateKind::Rho,
        p: rows(&layout.p_from(v)),
        multipliers: layout.multipliers_from(v),
        margin: worst,
        tuning: dt_tuning(&sys, mu, lipschitz),
    })
}

/// Smallest `ρ ∈ [RHO_LO, 1]` certified by the single-branch conditions.
pub fn baseline_certify(method: ScalarMethod, mu: f64, lipschitz: f64, iters: usize, opts: &LmiOptions) -> Result<BisectOutcome> {
    bisect_rate(|rho| baseline_feasible(method, mu, lipschitz, rho, opts), RHO_LO, 1.0, iters, Direction::FeasibleAbove)
}
