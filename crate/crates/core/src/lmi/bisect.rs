use log::warn;

use super::{Certificate, LmiOutcome};
use crate::error::{invalid, Result};

/// Number of points in the coarse monotonicity scan run before bisecting.
pub const SCAN_POINTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Feasible for large rates (ρ): find the smallest feasible value.
    FeasibleAbove,
    /// Feasible for small rates (α): find the largest feasible value.
    FeasibleBelow,
}

#[derive(Debug, Clone)]
pub struct BisectOutcome {
    /// Best certified rate parameter, `None` when no probe in `[lo, hi]` is feasible.
    pub rate: Option<f64>,
    pub certificate: Option<Certificate>,
    /// Outcome of the probe that produced `certificate`.
    pub best: Option<LmiOutcome>,
    /// The scan saw a feasible point on the wrong side of an infeasible one.
    pub non_monotone: bool,
    pub probes: usize,
}

/// Bisection over a scalar rate parameter with a feasibility oracle.
///
/// A 32-point uniform scan brackets the feasibility boundary (and flags
/// non-monotone feasibility), then `iters` halvings refine the bracket.
/// Probes that are not certified feasible, including indeterminate ones,
/// count as infeasible.
pub fn bisect_rate<F>(mut probe: F, lo: f64, hi: f64, iters: usize, direction: Direction) -> Result<BisectOutcome>
where
    F: FnMut(f64) -> Result<LmiOutcome>,
{
    if !(lo < hi) {
        return Err(invalid(format!("bisection needs lo < hi, got [{lo}, {hi}]")));
    }
    let grid: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (SCAN_POINTS - 1) as f64)
        .collect();
    let mut outcomes: Vec<LmiOutcome> = Vec::with_capacity(SCAN_POINTS);
    for &x in &grid {
        outcomes.push(probe(x)?);
    }
    let mut probes = SCAN_POINTS;
    let feasible: Vec<bool> = outcomes.iter().map(|o| o.is_feasible()).collect();

    let non_monotone = match direction {
        Direction::FeasibleAbove => feasible.windows(2).any(|w| w[0] && !w[1]),
        Direction::FeasibleBelow => feasible.windows(2).any(|w| !w[0] && w[1]),
    };
    if non_monotone {
        warn!("feasibility is not monotone on the scan of [{lo}, {hi}]");
    }

    // bracket: (inside, outside) where inside is feasible
    let (mut inside, mut outside, mut best) = match direction {
        Direction::FeasibleAbove => {
            let Some(i) = feasible.iter().position(|f| *f) else {
                return Ok(BisectOutcome { rate: None, certificate: None, best: None, non_monotone, probes });
            };
            if i == 0 {
                let best = outcomes.swap_remove(0);
                return Ok(finish(grid[0], best, non_monotone, probes));
            }
            (grid[i], grid[i - 1], outcomes.swap_remove(i))
        }
        Direction::FeasibleBelow => {
            if !feasible[0] {
                return Ok(BisectOutcome { rate: None, certificate: None, best: None, non_monotone, probes });
            }
            let j = feasible.iter().position(|f| !*f).unwrap_or(SCAN_POINTS);
            if j == SCAN_POINTS {
                let best = outcomes.swap_remove(SCAN_POINTS - 1);
                return Ok(finish(grid[SCAN_POINTS - 1], best, non_monotone, probes));
            }
            (grid[j - 1], grid[j], outcomes.swap_remove(j - 1))
        }
    };

    for _ in 0..iters {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        let out = probe(mid)?;
        probes += 1;
        if out.is_feasible() {
            inside = mid;
            best = out;
        } else {
            outside = mid;
        }
    }
    Ok(finish(inside, best, non_monotone, probes))
}

fn finish(rate: f64, best: LmiOutcome, non_monotone: bool, probes: usize) -> BisectOutcome {
    BisectOutcome {
        rate: Some(rate),
        certificate: best.certificate.clone(),
        best: Some(best),
        non_monotone,
        probes,
    }
}
