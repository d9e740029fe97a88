use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::linalg::lifted;

/// Quadratic constraint matrix satisfied by `(v - w, ∇φ(v) - ∇φ(w))` for every
/// μ-strongly convex φ with L-Lipschitz gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorMatrix {
    pub matrix: DMatrix<f64>,
    pub mu: f64,
    pub lipschitz: f64,
}

impl SectorMatrix {
    /// Evaluates the quadratic form on `(dv, dg)`.
    pub fn form(&self, dv: &[f64], dg: &[f64]) -> f64 {
        let e: Vec<f64> = dv.iter().chain(dg).copied().collect();
        let e = nalgebra::DVector::from_vec(e);
        (e.transpose() * &self.matrix * &e)[(0, 0)]
    }
}

/// `[[-μL/(μ+L)·I, ½I], [½I, -1/(μ+L)·I]]` of size `2n`.
pub fn build_sector(mu: f64, lipschitz: f64, n: usize) -> Result<SectorMatrix> {
    if !(mu > 0.0) || !(lipschitz > 0.0) {
        return Err(invalid("sector requires μ > 0 and L > 0"));
    }
    if mu > lipschitz {
        return Err(invalid(format!("sector requires μ ≤ L, got μ = {mu}, L = {lipschitz}")));
    }
    let s = mu + lipschitz;
    let matrix = lifted(2, 2, &[-mu * lipschitz / s, 0.5, 0.5, -1.0 / s], n);
    Ok(SectorMatrix { matrix, mu, lipschitz })
}
