use std::sync::Arc;

use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{check_dim, Objective, ObjectiveModel};
use crate::error::{invalid, Error, Result};

/// `φ(q) = Σᵢ log(1 + exp(−bᵢΘᵢᵀq))` for features `Θ ∈ R^{n×m}` (one
/// observation per column) and labels `bᵢ ∈ {−1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticSpec {
    pub theta: DMatrix<f64>,
    pub labels: Vec<f64>,
    pub m: usize,
}

impl LogisticSpec {
    pub fn new(theta: DMatrix<f64>, labels: Vec<f64>) -> Result<Self> {
        let m = theta.ncols();
        if m == 0 || theta.nrows() == 0 {
            return Err(invalid("need at least one feature and one observation"));
        }
        if labels.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: labels.len() });
        }
        if labels.iter().any(|b| *b != 1.0 && *b != -1.0) {
            return Err(invalid("labels must be exactly +1 or -1"));
        }
        Ok(Self { theta, labels, m })
    }

    pub fn dim(&self) -> usize {
        self.theta.nrows()
    }

    /// `L̂ = ¼·λ_max(ΘΘᵀ)`.
    pub fn lipschitz_estimate(&self) -> f64 {
        let gram = &self.theta * self.theta.transpose();
        0.25 * gram.symmetric_eigen().eigenvalues.max()
    }
}

/// `log(1 + eᶻ)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logistic_eval_grad(spec: &LogisticSpec, q: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    check_dim(spec.dim(), q)?;
    let margins = spec.theta.tr_mul(q);
    let mut value = 0.0;
    let mut weights = DVector::zeros(spec.m);
    for (i, (&mi, &bi)) in margins.iter().zip(&spec.labels).enumerate() {
        let z = -bi * mi;
        value += softplus(z);
        weights[i] = -bi * sigmoid(z);
    }
    Ok((value, &spec.theta * weights))
}

impl Objective for LogisticSpec {
    fn dim(&self) -> usize {
        self.theta.nrows()
    }

    fn eval_grad(&self, q: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        logistic_eval_grad(self, q)
    }
}

/// Standard-normal features and uniform ±1 labels.
pub fn gen_logistic_dataset(n: usize, m: usize, seed: u64) -> Result<LogisticSpec> {
    if n == 0 || m == 0 {
        return Err(invalid(format!("need n, m ≥ 1, got n = {n}, m = {m}")));
    }
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let theta = DMatrix::from_fn(n, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let labels = (0..m).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
    LogisticSpec::new(theta, labels)
}

/// Long-run gradient descent with step `1/L̂`, stopped at `max_iter` or when
/// `‖∇φ‖ ≤ tol`. Returns the final iterate and the gradient norm reached.
pub fn solve_logistic_reference(spec: &LogisticSpec, max_iter: usize, tol: f64) -> Result<(DVector<f64>, f64)> {
    let step = 1.0 / spec.lipschitz_estimate();
    let mut q = DVector::zeros(spec.dim());
    let mut g = logistic_eval_grad(spec, &q)?.1;
    let mut k = 0;
    while k < max_iter && g.norm() > tol {
        q -= &g * step;
        g = logistic_eval_grad(spec, &q)?.1;
        k += 1;
    }
    debug!("logistic reference: {k} iterations, gradient norm {:.3e}", g.norm());
    Ok((q, g.norm()))
}

/// Model with `L̂` attached and `μ` as supplied (0 when unknown). The
/// reference minimizer, when given, is stored as is: it is only as accurate
/// as the run that produced it.
pub fn logistic_model(spec: LogisticSpec, mu: f64, minimizer: Option<DVector<f64>>) -> Result<ObjectiveModel> {
    let l = spec.lipschitz_estimate();
    let min_value = match &minimizer {
        Some(q) => Some(logistic_eval_grad(&spec, q)?.0),
        None => None,
    };
    let mut model = ObjectiveModel::new(Arc::new(spec), mu, l)?;
    model.minimizer = minimizer;
    model.min_value = min_value;
    Ok(model)
}

#[derive(Serialize, Deserialize)]
struct LogisticJson {
    theta: Vec<f64>,
    labels: Vec<f64>,
    m: usize,
    n: usize,
}

impl Serialize for LogisticSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LogisticJson {
            theta: self.theta.as_slice().to_vec(),
            labels: self.labels.clone(),
            m: self.m,
            n: self.dim(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LogisticSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = LogisticJson::deserialize(d)?;
        if raw.theta.len() != raw.n * raw.m {
            return Err(serde::de::Error::custom("theta length must equal n·m"));
        }
        LogisticSpec::new(DMatrix::from_column_slice(raw.n, raw.m, &raw.theta), raw.labels)
            .map_err(serde::de::Error::custom)
    }
}
