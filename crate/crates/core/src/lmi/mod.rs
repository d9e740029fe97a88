//! Rate certification through linear matrix inequalities.
//!
//! * [`ct`]: the continuous-time reset-system conditions for the hybrid
//!   heavy-ball flow.
//! * [`dt`]: the discrete-time conditions for the two-branch switched Lur'e
//!   systems behind HHB/HiHB (Polyak and Nesterov forms).
//! * [`baseline`]: the single-branch (time-invariant) conditions, coded
//!   independently from the quadratic forms they encode.
//!
//! Every problem is scale-homogeneous; the engine works on the slice
//! `trace(P) + Σ multipliers = 1`.

mod audit;
pub mod baseline;
mod bisect;
mod certificate;
pub mod ct;
pub mod dt;
mod sector;

pub use audit::{audit_certificate, AuditReport};
pub use bisect::{bisect_rate, BisectOutcome, Direction, SCAN_POINTS};
pub use certificate::{Certificate, RateKind};
pub use sector::{build_sector, SectorMatrix};

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{sym_basis, sym_from_upper};
use crate::sdp::{
    solve_feasibility, AffineMatrixMap, FeasProblem, FeasResult, FeasStatus, LmiBlock,
    Normalization, DEFAULT_MARGIN, DEFAULT_MAX_ORACLE_CALLS,
};

/// Which discretization of the heavy-ball flow a system encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Discretization {
    /// Gradient evaluated at the current iterate.
    Polyak,
    /// Gradient evaluated at the extrapolated point.
    Nesterov,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmiOptions {
    /// Every "⪯ 0" constraint is enforced as "⪯ -margin·I".
    pub margin: f64,
    /// Positivity floor for multipliers.
    pub floor: f64,
    pub max_oracle_calls: usize,
}

impl Default for LmiOptions {
    fn default() -> Self {
        Self { margin: DEFAULT_MARGIN, floor: 1e-9, max_oracle_calls: DEFAULT_MAX_ORACLE_CALLS }
    }
}

/// Result of one feasibility probe.
#[derive(Debug, Clone)]
pub struct LmiOutcome {
    pub result: FeasResult,
    pub certificate: Option<Certificate>,
    pub problem: FeasProblem,
}

impl LmiOutcome {
    pub fn status(&self) -> FeasStatus {
        self.result.status
    }

    pub fn is_feasible(&self) -> bool {
        self.certificate.is_some()
    }
}

/// Decision variables: the upper triangle of a `p_dim × p_dim` matrix `P`
/// followed by named scalar multipliers.
#[derive(Debug, Clone)]
pub(crate) struct VarLayout {
    pub p_dim: usize,
    pub multipliers: Vec<&'static str>,
}

impl VarLayout {
    pub fn new(p_dim: usize, multipliers: &[&'static str]) -> Self {
        Self { p_dim, multipliers: multipliers.to_vec() }
    }

    pub fn p_count(&self) -> usize {
        self.p_dim * (self.p_dim + 1) / 2
    }

    pub fn num_vars(&self) -> usize {
        self.p_count() + self.multipliers.len()
    }

    pub fn mult(&self, name: &str) -> usize {
        self.p_count()
            + self.multipliers.iter().position(|m| *m == name).expect("known multiplier")
    }

    pub fn p_basis(&self) -> Vec<((usize, usize), DMatrix<f64>)> {
        sym_basis(self.p_dim)
    }

    pub fn names(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .p_basis()
            .iter()
            .map(|((i, j), _)| format!("P[{i}][{j}]"))
            .collect();
        out.extend(self.multipliers.iter().map(|m| m.to_string()));
        out
    }

    /// `P ⪰ margin·I` as a block over the `P` variables.
    pub fn p_block(&self) -> LmiBlock {
        let mut map = AffineMatrixMap::zero(self.p_dim);
        for (k, (_, e)) in self.p_basis().iter().enumerate() {
            map.add_term(k, e, 1.0);
        }
        LmiBlock::strict("P", map)
    }

    pub fn problem(&self, nsd_blocks: Vec<LmiBlock>, opts: &LmiOptions) -> FeasProblem {
        let mut bounds = Vec::with_capacity(self.num_vars());
        let mut coeffs = Vec::with_capacity(self.num_vars());
        for ((i, j), _) in self.p_basis() {
            if i == j {
                bounds.push((0.0, 1.0));
                coeffs.push(1.0);
            } else {
                bounds.push((-0.5, 0.5));
                coeffs.push(0.0);
            }
        }
        for _ in &self.multipliers {
            bounds.push((0.0, 1.0));
            coeffs.push(1.0);
        }
        let nonneg = (self.p_count()..self.num_vars()).map(|i| (i, opts.floor)).collect();
        FeasProblem {
            var_names: self.names(),
            nsd_blocks,
            pd_blocks: vec![self.p_block()],
            bounds,
            nonneg,
            normalization: Some(Normalization { coeffs, rhs: 1.0 }),
            margin: opts.margin,
        }
    }

    pub fn p_from(&self, v: &[f64]) -> DMatrix<f64> {
        sym_from_upper(self.p_dim, &v[..self.p_count()])
    }

    pub fn multipliers_from(&self, v: &[f64]) -> BTreeMap<String, f64> {
        self.multipliers
            .iter()
            .enumerate()
            .map(|(k, m)| (m.to_string(), v[self.p_count() + k]))
            .collect()
    }
}

pub(crate) fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Solves `problem` and, when feasible, packages a certificate via `make`.
pub(crate) fn solve_with(
    problem: FeasProblem,
    opts: &LmiOptions,
    make: impl FnOnce(&[f64], f64) -> Certificate,
) -> Result<LmiOutcome> {
    let result = solve_feasibility(&problem, opts.max_oracle_calls)?;
    let certificate = match (&result.status, &result.v) {
        (FeasStatus::Feasible, Some(v)) => Some(make(v, result.worst_eig)),
        _ => None,
    };
    Ok(LmiOutcome { result, certificate, problem })
}
