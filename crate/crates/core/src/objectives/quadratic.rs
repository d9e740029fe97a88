use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{check_dim, Objective, ObjectiveModel};
use crate::error::{invalid, Error, Result};
use crate::linalg::asymmetry;

/// `φ(q) = ½qᵀQq + bᵀq` with `Q` symmetric positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSpec {
    pub q: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl QuadraticSpec {
    pub fn new(q: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return Err(invalid("Q must be square"));
        }
        if b.len() != q.nrows() {
            return Err(Error::DimensionMismatch { expected: q.nrows(), got: b.len() });
        }
        let asym = asymmetry(&q);
        if asym > 1e-12 {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self { q, b })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// `q* = −Q⁻¹b`.
    pub fn minimizer(&self) -> Result<DVector<f64>> {
        let chol = self
            .q
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("Q is not positive definite".into()))?;
        Ok(-chol.solve(&self.b))
    }

    /// Extreme eigenvalues `(λ_min, λ_max)` of `Q`.
    pub fn spectrum_bounds(&self) -> (f64, f64) {
        let eig = self.q.clone().symmetric_eigen().eigenvalues;
        (eig.min(), eig.max())
    }

    /// Model with `(μ, L)` taken from the spectrum and `q*` attached.
    pub fn into_model(self) -> Result<ObjectiveModel> {
        let (mu, l) = self.spectrum_bounds();
        self.into_model_with(mu, l)
    }

    /// Model with caller-supplied `(μ, L)` and `q*` attached.
    pub fn into_model_with(self, mu: f64, lipschitz: f64) -> Result<ObjectiveModel> {
        let q_star = self.minimizer()?;
        ObjectiveModel::new(Arc::new(self), mu, lipschitz)?.with_minimizer(q_star)
    }
}

pub fn quad_eval_grad(spec: &QuadraticSpec, q: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    check_dim(spec.dim(), q)?;
    let qq = &spec.q * q;
    let value = 0.5 * q.dot(&qq) + spec.b.dot(q);
    Ok((value, qq + &spec.b))
}

impl Objective for QuadraticSpec {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn eval_grad(&self, q: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        quad_eval_grad(self, q)
    }

    fn exact_gap(&self, q: &DVector<f64>, minimizer: &DVector<f64>) -> Option<f64> {
        let d = q - minimizer;
        Some(0.5 * d.dot(&(&self.q * &d)))
    }
}

/// Random quadratic with spectrum in `[1, L]`, both ends attained.
///
/// A standard-normal matrix is factored as `USVᵀ`; its singular values are
/// replaced by `1`, `√L` and `n − 2` uniform draws from `[1, √L]`, and
/// `Q = Q̂Q̂ᵀ` for `Q̂ = UŜVᵀ`. Entries of `b` are uniform on `[−100, 100]`.
pub fn gen_random_quadratic(n: usize, lipschitz: f64, seed: u64) -> Result<(QuadraticSpec, ObjectiveModel)> {
    if n < 2 {
        return Err(invalid(format!("the generator needs n ≥ 2, got {n}")));
    }
    if !(lipschitz >= 1.0) {
        return Err(invalid(format!("the generator needs L ≥ 1, got {lipschitz}")));
    }
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let svd = g.svd(true, true);
    let u = svd.u.expect("requested U");
    let root = lipschitz.sqrt();
    let mut s = vec![1.0, root];
    s.extend((2..n).map(|_| rng.gen_range(1.0..=root)));
    // Q = UŜVᵀ(UŜVᵀ)ᵀ = UŜ²Uᵀ
    let s2 = DMatrix::from_diagonal(&DVector::from_iterator(n, s.iter().map(|x| x * x)));
    let mut q = &u * s2 * u.transpose();
    q = (&q + q.transpose()) * 0.5;
    let b = DVector::from_fn(n, |_, _| rng.gen_range(-100.0..=100.0));
    let spec = QuadraticSpec::new(q, b)?;
    let model = spec.clone().into_model_with(1.0, lipschitz)?;
    Ok((spec, model))
}

#[derive(Serialize, Deserialize)]
struct QuadraticJson {
    #[serde(rename = "Q")]
    q: Vec<f64>,
    b: Vec<f64>,
}

impl Serialize for QuadraticSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.dim();
        let q = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| self.q[(i, j)]).collect();
        QuadraticJson { q, b: self.b.iter().copied().collect() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for QuadraticSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = QuadraticJson::deserialize(d)?;
        let n = raw.b.len();
        if raw.q.len() != n * n {
            return Err(serde::de::Error::custom(format!("Q has {} entries, expected {}", raw.q.len(), n * n)));
        }
        QuadraticSpec::new(DMatrix::from_row_slice(n, n, &raw.q), DVector::from_vec(raw.b))
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::build_sector;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    #[test]
    fn identity_quadratic() {
        let spec = QuadraticSpec::new(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        let (v, g) = quad_eval_grad(&spec, &DVector::from_vec(vec![1.0, 1.0])).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(g.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn diagonal_quadratic() {
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
        let spec = QuadraticSpec::new(q, DVector::zeros(2)).unwrap();
        let (v, g) = quad_eval_grad(&spec, &DVector::from_vec(vec![2.0, 1.0])).unwrap();
        assert_eq!(v, 4.0);
        assert_eq!(g.as_slice(), &[2.0, 4.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let spec = QuadraticSpec::new(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        assert!(matches!(
            quad_eval_grad(&spec, &DVector::zeros(3)),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn unit_condition_forces_identity() {
        let (spec, _) = gen_random_quadratic(2, 1.0, 5).unwrap();
        let diff = (&spec.q - DMatrix::identity(2, 2)).amax();
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn spectrum_extremes_attained() {
        let (spec, model) = gen_random_quadratic(10, 1e3, 42).unwrap();
        let (lo, hi) = spec.spectrum_bounds();
        assert!((lo - 1.0).abs() <= 1e-6);
        assert!((hi - 1e3).abs() <= 1e-6 * 1e3);
        assert_eq!((model.mu, model.lipschitz), (1.0, 1e3));
    }

    #[test]
    fn generator_is_deterministic() {
        let (a, _) = gen_random_quadratic(6, 50.0, 9).unwrap();
        let (b, _) = gen_random_quadratic(6, 50.0, 9).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let (c, _) = gen_random_quadratic(6, 50.0, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generator_preconditions() {
        assert!(gen_random_quadratic(1, 10.0, 0).is_err());
        assert!(gen_random_quadratic(3, 0.5, 0).is_err());
    }

    #[test]
    fn minimizer_is_stationary() {
        let (_, model) = gen_random_quadratic(8, 100.0, 3).unwrap();
        let q_star = model.minimizer.clone().unwrap();
        assert!(model.gradient(&q_star).unwrap().norm() <= 1e-8 * q_star.norm().max(1.0));
        assert!(model.gap(&q_star).unwrap().abs() < 1e-12);
    }

    #[test]
    fn json_is_row_major_and_round_trips() {
        let spec = QuadraticSpec::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]),
            DVector::from_vec(vec![0.5, -1.0]),
        )
        .unwrap();
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(s, r#"{"Q":[2.0,1.0,1.0,3.0],"b":[0.5,-1.0]}"#);
        let back: QuadraticSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
        assert!(serde_json::from_str::<QuadraticSpec>(r#"{"Q":[1.0,2.0,0.0,1.0],"b":[0,0]}"#).is_err());
    }

    #[test]
    fn sector_inequality_on_sampled_pairs() {
        let (spec, model) = gen_random_quadratic(5, 20.0, 11).unwrap();
        let sector = build_sector(model.mu, model.lipschitz, 5).unwrap();
        let mut rng = Xoshiro256StarStar::seed_from_u64(0);
        for _ in 0..1000 {
            let v = DVector::from_fn(5, |_, _| rng.gen_range(-10.0..10.0));
            let w = DVector::from_fn(5, |_, _| rng.gen_range(-10.0..10.0));
            let dv = &v - &w;
            let dg = quad_eval_grad(&spec, &v).unwrap().1 - quad_eval_grad(&spec, &w).unwrap().1;
            let scale = dv.norm_squared() * model.lipschitz;
            assert!(sector.form(dv.as_slice(), dg.as_slice()) >= -1e-8 * scale);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn gradient_matches_finite_differences(seed in 0u64..1000, n in 2usize..8) {
            let (_, model) = gen_random_quadratic(n, 100.0, seed).unwrap();
            let mut rng = Xoshiro256StarStar::seed_from_u64(seed ^ 0xABCD);
            let q = DVector::from_fn(n, |_, _| rng.gen_range(-5.0..5.0));
            let err = super::super::finite_diff_check(&model, &q, 1e-5).unwrap();
            prop_assert!(err <= 1e-6, "relative error {err}");
        }
    }
}
