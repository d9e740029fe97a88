//! Seeded problem instances shared by the experiments.

use anyhow::{bail, Result};
use hhb_core::objectives::{
    gen_logistic_dataset, gen_random_quadratic, logistic_model, solve_logistic_reference, ObjectiveModel, QuadraticSpec,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};

/// Entries uniform on `[−radius, radius]`, drawn from the long-jumped stream
/// of `seed` so they are independent of the problem data drawn from `seed`.
pub fn uniform_start(n: usize, radius: f64, seed: u64) -> DVector<f64> {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    rng.long_jump();
    DVector::from_fn(n, |_, _| rng.gen_range(-radius..=radius))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// `φ(q) = ½cq²` started at `q = 1`.
    Scalar { curvature: f64 },
    /// Random quadratic with spectrum `[1, L]`, started uniformly in `[−100, 100]ⁿ`.
    Quadratic { n: usize, lipschitz: f64 },
    /// Logistic regression on Gaussian features, started at the origin.
    Logistic {
        n: usize,
        m: usize,
        #[serde(default = "default_reference_iters")]
        reference_iters: usize,
        #[serde(default = "default_reference_tol")]
        reference_tol: f64,
    },
}

fn default_reference_iters() -> usize {
    1_000_000
}

fn default_reference_tol() -> f64 {
    1e-10
}

impl ProblemConfig {
    pub fn logistic(n: usize, m: usize) -> Self {
        ProblemConfig::Logistic { n, m, reference_iters: default_reference_iters(), reference_tol: default_reference_tol() }
    }

    /// Whether the instance depends on the seed.
    pub fn is_random(&self) -> bool {
        !matches!(self, ProblemConfig::Scalar { .. })
    }

    /// The model (with its minimizer attached) and the start point.
    pub fn build(&self, seed: u64) -> Result<(ObjectiveModel, DVector<f64>)> {
        match *self {
            ProblemConfig::Scalar { curvature } => {
                if !(curvature > 0.0) {
                    bail!("curvature must be positive, got {curvature}");
                }
                let spec = QuadraticSpec::new(DMatrix::from_element(1, 1, curvature), DVector::zeros(1))?;
                Ok((spec.into_model()?, DVector::from_element(1, 1.0)))
            }
            ProblemConfig::Quadratic { n, lipschitz } => {
                let (_, model) = gen_random_quadratic(n, lipschitz, seed)?;
                Ok((model, uniform_start(n, 100.0, seed)))
            }
            ProblemConfig::Logistic { n, m, reference_iters, reference_tol } => {
                let spec = gen_logistic_dataset(n, m, seed)?;
                let (q_star, grad_norm) = solve_logistic_reference(&spec, reference_iters, reference_tol)?;
                if !(grad_norm <= reference_tol) {
                    bail!(
                        "reference gradient descent stopped at ‖∇φ‖ = {grad_norm:.3e} after {reference_iters} iterations, \
                         above the tolerance {reference_tol:.1e}; gaps against it would be meaningless"
                    );
                }
                Ok((logistic_model(spec, 0.0, Some(q_star))?, DVector::zeros(n)))
            }
        }
    }
}
