//! Log-det barrier refinement for probes the cutting-plane phase leaves open.
//!
//! Minimizes `t` subject to `G_i(z) ⪯ t·I` over the reduced box by following
//! the central path. Every barrier iterate yields dual matrices
//! `Z_i ∝ (tI − G_i)⁻¹`; for any such `Z ⪰ 0` with `Σ tr Z_i = 1`,
//! `min_v Σ tr(Z_i G_i(v))` over the box and normalization is a valid lower
//! bound on the worst eigenvalue, computed exactly as a one-constraint LP.

use nalgebra::{DMatrix, DVector};

use super::accpm::Reduction;
use super::eig::symmetric_eig;
use super::FeasProblem;
use crate::error::Result;

const GROWTH: f64 = 6.0;
const MAX_WEIGHT: f64 = 1e16;
const NEWTON_TOL: f64 = 1e-9;

pub(super) struct Refined {
    pub f_best: f64,
    pub v_best: Option<DVector<f64>>,
    pub lower: f64,
    pub calls: usize,
    /// Stopped because a decision was reached (feasible or lower bound).
    pub decided: bool,
}

struct Block {
    g0: DMatrix<f64>,
    gz: Vec<DMatrix<f64>>,
    sign: f64,
    shift: f64,
    map_index: (bool, usize),
}

struct Barrier<'a> {
    problem: &'a FeasProblem,
    red: &'a Reduction,
    blocks: Vec<Block>,
    dom_a: &'a [DVector<f64>],
    dom_b: &'a [f64],
    bounds: &'a [(f64, f64)],
}

impl Barrier<'_> {
    fn g(&self, b: &Block, z: &DVector<f64>) -> DMatrix<f64> {
        let mut m = b.g0.clone();
        for (j, gj) in b.gz.iter().enumerate() {
            m += gj * z[j];
        }
        m
    }

    fn worst(&self, z: &DVector<f64>) -> Result<f64> {
        let mut w = f64::NEG_INFINITY;
        for b in &self.blocks {
            w = w.max(symmetric_eig(&self.g(b, z))?.max());
        }
        Ok(w)
    }

    /// Barrier value `weight·t − Σ log det(tI − G_i) − Σ log(slack)`, or
    /// `None` outside the domain.
    fn value(&self, z: &DVector<f64>, t: f64, weight: f64) -> Option<f64> {
        let mut val = weight * t;
        for b in &self.blocks {
            let d = b.g0.nrows();
            let s = DMatrix::identity(d, d) * t - self.g(b, z);
            let chol = s.cholesky()?;
            val -= 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        }
        for (a, rhs) in self.dom_a.iter().zip(self.dom_b) {
            let slack = rhs - a.dot(z);
            if !(slack > 0.0) {
                return None;
            }
            val -= slack.ln();
        }
        val.is_finite().then_some(val)
    }

    /// Gradient and Hessian over `(z, t)`, plus the normalized dual matrices.
    fn derivatives(&self, z: &DVector<f64>, t: f64, weight: f64) -> Option<(DVector<f64>, DMatrix<f64>, Vec<DMatrix<f64>>)> {
        let r = z.len();
        let mut grad = DVector::zeros(r + 1);
        let mut hess = DMatrix::zeros(r + 1, r + 1);
        grad[r] = weight;
        let mut duals = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let d = b.g0.nrows();
            let s = DMatrix::identity(d, d) * t - self.g(b, z);
            let s_inv = s.cholesky()?.inverse();
            // dS/dz_j = −G_j, dS/dt = I
            let mut w: Vec<DMatrix<f64>> = b.gz.iter().map(|gj| -(&s_inv * gj)).collect();
            w.push(s_inv.clone());
            for j in 0..r {
                grad[j] += (&s_inv * &b.gz[j]).trace();
            }
            grad[r] -= s_inv.trace();
            for k in 0..=r {
                for l in k..=r {
                    let h = w[k].component_mul(&w[l].transpose()).sum();
                    hess[(k, l)] += h;
                    if k != l {
                        hess[(l, k)] += h;
                    }
                }
            }
            duals.push(s_inv);
        }
        for (a, rhs) in self.dom_a.iter().zip(self.dom_b) {
            let slack = rhs - a.dot(z);
            if !(slack > 0.0) {
                return None;
            }
            for j in 0..r {
                grad[j] += a[j] / slack;
                for l in 0..r {
                    hess[(j, l)] += a[j] * a[l] / (slack * slack);
                }
            }
        }
        Some((grad, hess, duals))
    }

    /// Exact `min_v Σ tr(Z_i G_i(v))` over the box and normalization.
    fn dual_bound(&self, duals: &[DMatrix<f64>]) -> f64 {
        let total: f64 = duals.iter().map(|z| z.trace()).sum();
        if !(total > 0.0) {
            return f64::NEG_INFINITY;
        }
        let nv = self.problem.num_vars();
        let mut c0 = 0.0;
        let mut c = vec![0.0; nv];
        for (zi, b) in duals.iter().zip(&self.blocks) {
            let zi = zi / total;
            let (pd, idx) = b.map_index;
            let block = if pd { &self.problem.pd_blocks[idx] } else { &self.problem.nsd_blocks[idx] };
            c0 += b.sign * zi.component_mul(&block.map.constant).sum() - b.shift * zi.trace();
            for (var, m) in &block.map.terms {
                c[*var] += b.sign * zi.component_mul(m).sum();
            }
        }
        c0 + box_lp_min(&c, self.bounds, self.problem.normalization.as_ref().map(|n| (&n.coeffs[..], n.rhs)))
    }
}

/// `min c·v` over `lo ≤ v ≤ hi` and, optionally, `n·v = rhs`, via its
/// one-dimensional Lagrangian dual (exact at the best breakpoint; any
/// multiplier gives a valid bound).
pub(super) fn box_lp_min(c: &[f64], bounds: &[(f64, f64)], norm: Option<(&[f64], f64)>) -> f64 {
    let lagrangian = |lambda: f64, n: &[f64], rhs: f64| -> f64 {
        let mut v = lambda * rhs;
        for j in 0..c.len() {
            let cj = c[j] - lambda * n[j];
            v += if cj >= 0.0 { cj * bounds[j].0 } else { cj * bounds[j].1 };
        }
        v
    };
    match norm {
        None => c.iter().zip(bounds).map(|(cj, (lo, hi))| if *cj >= 0.0 { cj * lo } else { cj * hi }).sum(),
        Some((n, rhs)) => {
            let mut best = lagrangian(0.0, n, rhs);
            for j in 0..c.len() {
                if n[j] != 0.0 {
                    best = best.max(lagrangian(c[j] / n[j], n, rhs));
                }
            }
            best
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub(super) fn refine(
    problem: &FeasProblem,
    red: &Reduction,
    bounds: &[(f64, f64)],
    dom_a: &[DVector<f64>],
    dom_b: &[f64],
    z_start: &DVector<f64>,
    lower_in: f64,
    budget: usize,
) -> Result<Refined> {
    let margin = problem.margin;
    let r = red.dim();
    let mut blocks = Vec::new();
    let all = problem
        .nsd_blocks
        .iter()
        .enumerate()
        .map(|(i, b)| (b, 1.0, (false, i)))
        .chain(problem.pd_blocks.iter().enumerate().map(|(i, b)| (b, -1.0, (true, i))));
    for (block, sign, map_index) in all {
        let d = block.map.dim();
        let shift = if block.relaxed { 2.0 * margin } else { 0.0 };
        let g0 = (block.map.eval(red.v0.as_slice()) * sign) - DMatrix::identity(d, d) * shift;
        let mut gz = vec![DMatrix::zeros(d, d); r];
        for (var, m) in &block.map.terms {
            for (j, gj) in gz.iter_mut().enumerate() {
                let coef = red.t[(*var, j)];
                if coef != 0.0 {
                    *gj += m * (sign * coef);
                }
            }
        }
        blocks.push(Block { g0, gz, sign, shift, map_index });
    }
    let bar = Barrier { problem, red, blocks, dom_a, dom_b, bounds };

    let mut out = Refined { f_best: f64::INFINITY, v_best: None, lower: lower_in, calls: 0, decided: false };
    let mut z = z_start.clone();
    let f0 = bar.worst(&z)?;
    out.calls += 1;
    record(&mut out, &bar, &z, f0);
    if out.f_best <= -margin {
        out.decided = true;
        return Ok(out);
    }
    let mut t = f0 + f0.abs().max(1.0);
    let mut weight = 1.0;

    while out.calls < budget && weight <= MAX_WEIGHT {
        // centering
        for _ in 0..50 {
            if out.calls >= budget {
                break;
            }
            let Some((grad, hess, duals)) = bar.derivatives(&z, t, weight) else { break };
            let lb = bar.dual_bound(&duals);
            if lb.is_finite() {
                out.lower = out.lower.max(lb);
            }
            if out.lower > -margin {
                out.decided = true;
                return Ok(out);
            }
            let Some(chol) = regularized_cholesky(hess) else { break };
            let dx = chol.solve(&(-&grad));
            let dec2 = -grad.dot(&dx);
            if dec2 <= NEWTON_TOL {
                break;
            }
            let dz = dx.rows(0, r).into_owned();
            let dt = dx[r];
            let f_now = bar.value(&z, t, weight).expect("iterate in domain");
            let mut step = if dec2 > 0.25 { 1.0 / (1.0 + dec2.sqrt()) } else { 1.0 };
            let mut accepted = false;
            while step > 1e-12 {
                let zn = &z + &dz * step;
                let tn = t + dt * step;
                if let Some(fv) = bar.value(&zn, tn, weight) {
                    if fv <= f_now - 0.25 * step * dec2 {
                        z = zn;
                        t = tn;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
            let f = bar.worst(&z)?;
            out.calls += 1;
            record(&mut out, &bar, &z, f);
            if out.f_best <= -margin {
                out.decided = true;
                return Ok(out);
            }
        }
        weight *= GROWTH;
    }
    Ok(out)
}

fn record(out: &mut Refined, bar: &Barrier<'_>, z: &DVector<f64>, f: f64) {
    if f < out.f_best {
        out.f_best = f;
        out.v_best = Some(bar.red.lift(z));
    }
}

fn regularized_cholesky(h: DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = h.clone().cholesky() {
        return Some(c);
    }
    let reg = 1e-14 * h.diagonal().amax().max(1e-300);
    let n = h.nrows();
    (h + DMatrix::identity(n, n) * reg).cholesky()
}
