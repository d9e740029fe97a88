//! Small dense semidefinite feasibility engine.
//!
//! Problems are posed as affine matrix maps of a handful of scalar decision
//! variables. [`solve_feasibility`] minimizes the worst (sign-adjusted)
//! maximum eigenvalue over all blocks with an analytic-center cutting-plane
//! method and reports whether the strict margin can be met.

mod accpm;
mod barrier;
mod eig;

pub use accpm::{solve_feasibility, worst_eigenvalue, DEFAULT_MAX_ORACLE_CALLS};
pub use eig::{check_nsd, max_eigenvalue, symmetric_eig, SymEig, MAX_DIM};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::asymmetry;

/// Default strict margin applied to every "≤ 0" constraint.
pub const DEFAULT_MARGIN: f64 = 1e-9;

/// The map `v ↦ constant + Σ v_i · basis_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMatrixMap {
    pub constant: DMatrix<f64>,
    pub terms: Vec<(usize, DMatrix<f64>)>,
}

impl AffineMatrixMap {
    pub fn zero(dim: usize) -> Self {
        Self { constant: DMatrix::zeros(dim, dim), terms: Vec::new() }
    }

    pub fn with_constant(constant: DMatrix<f64>) -> Self {
        Self { constant, terms: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    /// Adds `coef · v_var · mat`, merging with an existing term for `var`.
    pub fn add_term(&mut self, var: usize, mat: &DMatrix<f64>, coef: f64) {
        if let Some((_, m)) = self.terms.iter_mut().find(|(i, _)| *i == var) {
            *m += mat * coef;
        } else {
            self.terms.push((var, mat * coef));
        }
    }

    pub fn term(mut self, var: usize, mat: &DMatrix<f64>) -> Self {
        self.add_term(var, mat, 1.0);
        self
    }

    pub fn eval(&self, v: &[f64]) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (i, m) in &self.terms {
            out += m * v[*i];
        }
        out
    }

    fn validate(&self, num_vars: usize) -> Result<()> {
        let d = self.dim();
        let check = |m: &DMatrix<f64>| -> Result<()> {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: m.nrows() });
            }
            let asym = asymmetry(m);
            if asym > 1e-12 {
                return Err(Error::NotSymmetric(asym));
            }
            Ok(())
        };
        check(&self.constant)?;
        for (i, m) in &self.terms {
            if *i >= num_vars {
                return Err(invalid(format!("term references variable {i} of {num_vars}")));
            }
            check(m)?;
        }
        Ok(())
    }
}

/// One matrix constraint of a [`FeasProblem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiBlock {
    pub name: String,
    pub map: AffineMatrixMap,
    /// A relaxed block only needs its extreme eigenvalue within `+margin`
    /// instead of `-margin` (used for blocks with a structural null space).
    #[serde(default)]
    pub relaxed: bool,
}

impl LmiBlock {
    pub fn strict(name: impl Into<String>, map: AffineMatrixMap) -> Self {
        Self { name: name.into(), map, relaxed: false }
    }

    pub fn relaxed(name: impl Into<String>, map: AffineMatrixMap) -> Self {
        Self { name: name.into(), map, relaxed: true }
    }
}

/// Linear equality `Σ coeffs_i v_i = rhs` removing scaling homogeneity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasProblem {
    pub var_names: Vec<String>,
    /// Blocks required `⪯ -margin·I`.
    pub nsd_blocks: Vec<LmiBlock>,
    /// Blocks required `⪰ +margin·I`.
    pub pd_blocks: Vec<LmiBlock>,
    /// Box bounds for every variable; the search domain.
    pub bounds: Vec<(f64, f64)>,
    /// Variables with a positivity floor.
    pub nonneg: Vec<(usize, f64)>,
    pub normalization: Option<Normalization>,
    pub margin: f64,
}

impl FeasProblem {
    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.num_vars();
        if self.nsd_blocks.is_empty() && self.pd_blocks.is_empty() {
            return Err(invalid("feasibility problem has no blocks"));
        }
        if self.bounds.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.bounds.len() });
        }
        if !(self.margin >= 0.0) {
            return Err(invalid("margin must be nonnegative"));
        }
        for b in self.nsd_blocks.iter().chain(&self.pd_blocks) {
            b.map.validate(d)?;
            if b.map.dim() > MAX_DIM {
                return Err(invalid(format!("block {} exceeds {MAX_DIM}x{MAX_DIM}", b.name)));
            }
        }
        for &(i, _) in &self.nonneg {
            if i >= d {
                return Err(invalid(format!("floor references variable {i} of {d}")));
            }
        }
        for (lo, hi) in &self.bounds {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(invalid("variable bounds must be finite with lo ≤ hi"));
            }
        }
        if let Some(n) = &self.normalization {
            if n.coeffs.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: n.coeffs.len() });
            }
            if n.coeffs.iter().all(|c| *c == 0.0) {
                return Err(invalid("normalization has no nonzero coefficient"));
            }
        }
        Ok(())
    }

    /// Lower bounds after applying the positivity floors.
    pub(crate) fn effective_bounds(&self) -> Vec<(f64, f64)> {
        let mut b = self.bounds.clone();
        for &(i, floor) in &self.nonneg {
            b[i].0 = b[i].0.max(floor);
        }
        b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FeasStatus {
    Feasible,
    Infeasible,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasResult {
    pub status: FeasStatus,
    /// Variable assignment, present iff feasible.
    pub v: Option<Vec<f64>>,
    /// Best value of the worst shifted eigenvalue over all blocks.
    pub worst_eig: f64,
    /// Cutting-plane lower bound on the minimal worst eigenvalue.
    pub lower_bound: f64,
    pub oracle_calls: usize,
}

impl FeasResult {
    pub fn is_feasible(&self) -> bool {
        self.status == FeasStatus::Feasible
    }
}
