use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::kron_eye;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateKind {
    /// Per-iteration contraction ρ; function gap decays like ρ^{2k}.
    Rho,
    /// Continuous-time exponent; state error decays like exp(-rate·t).
    Alpha,
}

/// A feasible solution of one of the rate LMIs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub rate: f64,
    pub rate_kind: RateKind,
    /// Row-major `P`.
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    pub multipliers: BTreeMap<String, f64>,
    /// Worst shifted eigenvalue over all constraint blocks (≤ -tolerance).
    pub margin: f64,
    pub tuning: BTreeMap<String, f64>,
}

impl Certificate {
    pub fn p_matrix(&self) -> DMatrix<f64> {
        let d = self.p.len();
        DMatrix::from_fn(d, d, |i, j| self.p[i][j])
    }

    pub fn multiplier(&self, name: &str) -> Option<f64> {
        self.multipliers.get(name).copied()
    }

    /// Lifts the scalar-case `P` to dimension `n` as `P ⊗ I_n`.
    pub fn lifted_p(&self, n: usize) -> DMatrix<f64> {
        kron_eye(&self.p_matrix(), n)
    }

    /// `a·gap + x̃ᵀ(P⊗I)x̃`, the Lyapunov value without the `ρ^{-2k}` weight.
    ///
    /// `x_tilde` stacks `(q_{k-1} - q*, q_k - q*)`.
    pub fn unweighted_lyapunov(&self, x_tilde: &DVector<f64>, gap: f64) -> f64 {
        let a = self.multiplier("a").expect("discrete-time certificate carries `a`");
        let n = x_tilde.len() / 2;
        let p = self.lifted_p(n);
        a * gap + (x_tilde.transpose() * p * x_tilde)[(0, 0)]
    }

    /// `V_k = ρ^{-2k}(a·gap + x̃ᵀPx̃)`. Overflows for long horizons; prefer
    /// comparing [`Certificate::unweighted_lyapunov`] values.
    pub fn lyapunov(&self, k: usize, x_tilde: &DVector<f64>, gap: f64) -> f64 {
        self.rate.powi(-2 * k as i32) * self.unweighted_lyapunov(x_tilde, gap)
    }

    /// Constant `c` in `φ(ξ_k) - φ* ≤ c·ρ^{2k}` for the initial condition.
    pub fn bound_constant(&self, x0_tilde: &DVector<f64>, gap0: f64) -> f64 {
        let a = self.multiplier("a").expect("discrete-time certificate carries `a`");
        self.unweighted_lyapunov(x0_tilde, gap0) / a
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}
