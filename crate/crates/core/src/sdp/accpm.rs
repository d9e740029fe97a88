//! Analytic-center cutting-plane minimization of the worst block eigenvalue.

use nalgebra::{DMatrix, DVector};

use super::barrier;
use super::eig::symmetric_eig;
use super::{FeasProblem, FeasResult, FeasStatus};
use crate::error::{invalid, Result};

pub const DEFAULT_MAX_ORACLE_CALLS: usize = 3000;

const NEWTON_MAX_ITERS: usize = 50;

/// Oracle calls granted to the cutting-plane phase before the barrier
/// refinement takes over.
const CUTTING_PLANE_CALLS: usize = 60;

/// Reduced coordinates: `v = v0 + T z`, one variable eliminated by the
/// normalization when present.
pub(super) struct Reduction {
    pub v0: DVector<f64>,
    pub t: DMatrix<f64>,
    pub free: Vec<usize>,
}

impl Reduction {
    fn new(problem: &FeasProblem) -> Self {
        let d = problem.num_vars();
        match &problem.normalization {
            None => Self {
                v0: DVector::zeros(d),
                t: DMatrix::identity(d, d),
                free: (0..d).collect(),
            },
            Some(norm) => {
                let mut k = 0;
                for (i, c) in norm.coeffs.iter().enumerate() {
                    if c.abs() > norm.coeffs[k].abs() {
                        k = i;
                    }
                }
                let free: Vec<usize> = (0..d).filter(|&i| i != k).collect();
                let ck = norm.coeffs[k];
                let mut v0 = DVector::zeros(d);
                v0[k] = norm.rhs / ck;
                let mut t = DMatrix::zeros(d, free.len());
                for (col, &j) in free.iter().enumerate() {
                    t[(j, col)] = 1.0;
                    t[(k, col)] = -norm.coeffs[j] / ck;
                }
                Self { v0, t, free }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.free.len()
    }

    pub fn lift(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.v0 + &self.t * z
    }
}

struct Oracle<'a> {
    problem: &'a FeasProblem,
}

struct OracleOut {
    value: f64,
    subgrad: DVector<f64>,
}

impl Oracle<'_> {
    /// Worst shifted eigenvalue and a subgradient with respect to `v`.
    fn eval(&self, v: &[f64]) -> Result<OracleOut> {
        let margin = self.problem.margin;
        let mut best: Option<(f64, DVector<f64>)> = None;
        let blocks = self
            .problem
            .nsd_blocks
            .iter()
            .map(|b| (b, 1.0))
            .chain(self.problem.pd_blocks.iter().map(|b| (b, -1.0)));
        for (block, sign) in blocks {
            let m = block.map.eval(v) * sign;
            let eig = symmetric_eig(&m)?;
            let shift = if block.relaxed { 2.0 * margin } else { 0.0 };
            let value = eig.max() - shift;
            if best.as_ref().map_or(true, |(b, _)| value > *b) {
                let w = eig.top_vector();
                let mut g = DVector::zeros(v.len());
                for (i, basis) in &block.map.terms {
                    g[*i] += sign * (w.transpose() * basis * &w)[(0, 0)];
                }
                best = Some((value, g));
            }
        }
        let (value, subgrad) = best.expect("validated problem has blocks");
        Ok(OracleOut { value, subgrad })
    }
}

/// Worst sign-adjusted (and relaxation-shifted) maximum eigenvalue over all
/// blocks at `v`; feasibility means this is `≤ -margin`.
pub fn worst_eigenvalue(problem: &FeasProblem, v: &[f64]) -> Result<f64> {
    Ok(Oracle { problem }.eval(v)?.value)
}

struct Cut {
    // normalized row: a = g/|g|, with f(z) ≥ f_i + g·(z - x_i)
    a: DVector<f64>,
    scale: f64,
    f: f64,
    gx: f64,
}

/// Decides strict feasibility of `problem` within `max_oracle_calls`
/// evaluations of the eigenvalue oracle.
pub fn solve_feasibility(problem: &FeasProblem, max_oracle_calls: usize) -> Result<FeasResult> {
    problem.validate()?;
    let margin = problem.margin;
    let oracle = Oracle { problem };
    let red = Reduction::new(problem);
    let bounds = problem.effective_bounds();
    let r = red.dim();

    // domain rows a·z ≤ b from the variable box
    let mut dom_a: Vec<DVector<f64>> = Vec::new();
    let mut dom_b: Vec<f64> = Vec::new();
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        let row = red.t.row(j).transpose();
        if row.iter().all(|x| *x == 0.0) {
            if red.v0[j] < lo || red.v0[j] > hi {
                return Err(invalid("normalization incompatible with bounds"));
            }
            continue;
        }
        dom_a.push(row.clone());
        dom_b.push(hi - red.v0[j]);
        dom_a.push(-row);
        dom_b.push(red.v0[j] - lo);
    }
    let zbox: Vec<(f64, f64)> = red.free.iter().map(|&j| bounds[j]).collect();

    let start = interior_start(problem, &bounds)?;
    let mut z = DVector::from_iterator(r, red.free.iter().map(|&j| start[j]));

    let mut cuts: Vec<Cut> = Vec::new();
    let mut f_best = f64::INFINITY;
    let mut v_best: Option<DVector<f64>> = None;
    let mut lower = f64::NEG_INFINITY;
    let max_cuts = (5 * r).max(24);

    let phase_calls = max_oracle_calls.clamp(1, CUTTING_PLANE_CALLS);
    let mut calls = 0;
    for call in 1..=phase_calls {
        calls = call;
        let v = red.lift(&z);
        let out = oracle.eval(v.as_slice())?;
        if out.value < f_best {
            f_best = out.value;
            v_best = Some(v.clone());
        }
        if f_best <= -margin {
            let v = v_best.take().expect("best point recorded");
            return finish_feasible(problem, v, lower, call);
        }
        let gz = red.t.transpose() * &out.subgrad;
        let gnorm = gz.norm();
        if r == 0 || gnorm <= 1e-300 {
            // the query point minimizes f over the domain
            lower = lower.max(out.value);
            return Ok(infeasible_or_unknown(f_best, lower, margin, call));
        }
        cuts.push(Cut { a: &gz / gnorm, scale: 1.0 / gnorm, f: out.value, gx: gz.dot(&z) });

        // localization polytope at level f_best; when its interior collapses
        // (f_best is already near the minimum) the level is relaxed upward
        let m = dom_a.len() + cuts.len();
        let off = dom_a.len();
        let mut a = DMatrix::zeros(m, r);
        for (i, row) in dom_a.iter().enumerate() {
            a.set_row(i, &row.transpose());
        }
        for (i, c) in cuts.iter().enumerate() {
            a.set_row(off + i, &c.a.transpose());
        }
        let mut b = DVector::zeros(m);
        let mut found = None;
        for attempt in 0..8 {
            let level = if attempt == 0 {
                f_best
            } else {
                f_best + f_best.abs().max(margin) * 10f64.powi(2 * attempt as i32 - 8)
            };
            for (i, rhs) in dom_b.iter().enumerate() {
                b[i] = *rhs;
            }
            for (i, c) in cuts.iter().enumerate() {
                b[off + i] = c.scale * (c.gx - c.f + level);
            }
            if let Some(center) = analytic_center(&a, &b, &z) {
                found = Some(center);
                break;
            }
        }
        let Some(center) = found else {
            break;
        };

        // lower bound from the centering multipliers 1/y
        let lam = center.y.map(|y| 1.0 / y);
        let resid = a.transpose() * &lam;
        let mut dom_sum = 0.0;
        for i in 0..off {
            dom_sum += lam[i] * b[i];
        }
        let (mut w_sum, mut w_aff) = (0.0, 0.0);
        for (i, c) in cuts.iter().enumerate() {
            let w = lam[off + i] * c.scale;
            w_sum += w;
            w_aff += w * (c.f - c.gx);
        }
        let box_min: f64 = resid
            .iter()
            .zip(&zbox)
            .map(|(ri, (lo, hi))| if *ri >= 0.0 { ri * lo } else { ri * hi })
            .sum();
        if w_sum > 0.0 {
            let lb = (w_aff - dom_sum + box_min) / w_sum;
            if lb.is_finite() {
                lower = lower.max(lb);
            }
        }
        if lower > -margin {
            return Ok(infeasible_or_unknown(f_best, lower, margin, call));
        }

        if cuts.len() > max_cuts {
            prune(&mut cuts, &a, &center, off, max_cuts);
        }
        z = center.z;
    }

    // undecided: refine from the best point found so far
    let budget = max_oracle_calls.saturating_sub(calls);
    if budget > 0 {
        let z_best = match &v_best {
            Some(v) => DVector::from_iterator(r, red.free.iter().map(|&j| v[j])),
            None => z.clone(),
        };
        if dom_a.iter().zip(&dom_b).all(|(a, b)| a.dot(&z_best) < *b) {
            let out = barrier::refine(problem, &red, &bounds, &dom_a, &dom_b, &z_best, lower, budget)?;
            lower = lower.max(out.lower);
            calls += out.calls;
            if out.f_best < f_best {
                f_best = out.f_best;
                v_best = out.v_best;
            }
            if f_best <= -margin {
                let v = v_best.take().expect("best point recorded");
                return finish_feasible(problem, v, lower, calls);
            }
        }
    }
    Ok(infeasible_or_unknown(f_best, lower, margin, calls))
}

fn infeasible_or_unknown(f_best: f64, lower: f64, margin: f64, calls: usize) -> FeasResult {
    let status = if lower > -margin { FeasStatus::Infeasible } else { FeasStatus::Indeterminate };
    FeasResult { status, v: None, worst_eig: f_best, lower_bound: lower, oracle_calls: calls }
}

fn finish_feasible(
    problem: &FeasProblem,
    v: DVector<f64>,
    lower: f64,
    calls: usize,
) -> Result<FeasResult> {
    // independent re-check of every block at half the margin
    let half = 0.5 * problem.margin;
    let mut worst = f64::NEG_INFINITY;
    let mut ok = true;
    for (block, sign) in problem
        .nsd_blocks
        .iter()
        .map(|b| (b, 1.0))
        .chain(problem.pd_blocks.iter().map(|b| (b, -1.0)))
    {
        let shift = if block.relaxed { 2.0 * problem.margin } else { 0.0 };
        let m = block.map.eval(v.as_slice()) * sign;
        let top = symmetric_eig(&m)?.max() - shift;
        worst = worst.max(top);
        ok &= top <= -half;
    }
    let status = if ok { FeasStatus::Feasible } else { FeasStatus::Indeterminate };
    Ok(FeasResult {
        status,
        v: ok.then(|| v.as_slice().to_vec()),
        worst_eig: worst,
        lower_bound: lower,
        oracle_calls: calls,
    })
}

/// A strictly interior point of the variable box satisfying the normalization.
fn interior_start(problem: &FeasProblem, bounds: &[(f64, f64)]) -> Result<Vec<f64>> {
    let lo: Vec<f64> = bounds.iter().map(|b| b.0).collect();
    let width: Vec<f64> = bounds.iter().map(|b| b.1 - b.0).collect();
    let theta = match &problem.normalization {
        None => 0.5,
        Some(n) => {
            let base: f64 = n.coeffs.iter().zip(&lo).map(|(c, l)| c * l).sum();
            let span: f64 = n.coeffs.iter().zip(&width).map(|(c, w)| c * w).sum();
            let t = (n.rhs - base) / span;
            if !(t > 0.0 && t < 1.0) {
                return Err(invalid("no interior point satisfies the normalization"));
            }
            t
        }
    };
    Ok(lo.iter().zip(&width).map(|(l, w)| l + theta * w).collect())
}

struct Center {
    z: DVector<f64>,
    y: DVector<f64>,
    hess_inv: DMatrix<f64>,
}

/// Analytic center of `{z : A z < b}` by infeasible-start Newton.
fn analytic_center(a: &DMatrix<f64>, b: &DVector<f64>, z0: &DVector<f64>) -> Option<Center> {
    let m = a.nrows();
    let mut z = z0.clone();
    let slack0 = b - a * &z;
    let mut y = slack0.map(|s| if s > 0.0 { s } else { 1.0 });
    let mut nu = y.map(|yi| 1.0 / yi);
    let scale = 1.0 + b.amax();

    let residual = |z: &DVector<f64>, y: &DVector<f64>, nu: &DVector<f64>| -> f64 {
        let rd1 = a.transpose() * nu;
        let rd2 = DVector::from_fn(m, |i, _| nu[i] - 1.0 / y[i]);
        let rp = y + a * z - b;
        (rd1.norm_squared() + rd2.norm_squared() + rp.norm_squared()).sqrt()
    };

    for _ in 0..NEWTON_MAX_ITERS {
        let h = y.map(|yi| 1.0 / (yi * yi));
        let g = y.map(|yi| -1.0 / yi);
        let rp = &y + a * &z - b;
        let mut ah = a.clone();
        for i in 0..m {
            let hi = h[i];
            ah.row_mut(i).scale_mut(hi);
        }
        let hess = a.transpose() * &ah;
        let rhs = a.transpose() * DVector::from_fn(m, |i, _| g[i] - h[i] * rp[i]);
        let chol = match hess.clone().cholesky() {
            Some(c) => c,
            None => {
                let reg = 1e-12 * hess.diagonal().amax().max(1e-300);
                (hess.clone() + DMatrix::identity(hess.nrows(), hess.ncols()) * reg).cholesky()?
            }
        };
        let dz = chol.solve(&rhs);
        let adz = a * &dz;
        let dy = -&adz - &rp;
        let dnu = DVector::from_fn(m, |i, _| h[i] * (adz[i] + rp[i]) - g[i] - nu[i]);

        let primal_ok = rp.amax() <= 1e-12 * scale;
        let decrement = dz.dot(&(&hess * &dz));
        if primal_ok && decrement <= 1e-18 {
            let y_final = b - a * &z;
            if y_final.iter().all(|s| *s > 0.0) {
                return Some(Center { z, y: y_final, hess_inv: chol.inverse() });
            }
        }

        let r0 = residual(&z, &y, &nu);
        let mut t = 1.0;
        while (0..m).any(|i| y[i] + t * dy[i] <= 0.0) {
            t *= 0.5;
            if t < 1e-14 {
                return None;
            }
        }
        loop {
            let zt = &z + &dz * t;
            let yt = &y + &dy * t;
            let nut = &nu + &dnu * t;
            if residual(&zt, &yt, &nut) <= (1.0 - 0.01 * t) * r0 || t < 1e-10 {
                z = zt;
                y = yt;
                nu = nut;
                break;
            }
            t *= 0.5;
        }
    }
    None
}

// Drops the least relevant cuts, ranked by slack over the Dikin-ellipsoid width.
fn prune(cuts: &mut Vec<Cut>, a: &DMatrix<f64>, center: &Center, off: usize, keep: usize) {
    let mut ranked: Vec<(f64, usize)> = (0..cuts.len())
        .map(|i| {
            let row = a.row(off + i).transpose();
            let width = (row.transpose() * &center.hess_inv * &row)[(0, 0)].max(1e-300).sqrt();
            (center.y[off + i] / width, i)
        })
        .collect();
    ranked.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let mut retain: Vec<usize> = ranked.iter().take(keep).map(|(_, i)| *i).collect();
    retain.sort_unstable();
    let mut kept = Vec::with_capacity(keep);
    for (i, c) in cuts.drain(..).enumerate() {
        if retain.binary_search(&i).is_ok() {
            kept.push(c);
        }
    }
    *cuts = kept;
}
