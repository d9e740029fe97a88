use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::HybridState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcSample {
    pub t: f64,
    pub j: usize,
    pub state: HybridState,
    pub energy: f64,
}

/// A reset: flow time, the jump counter after it, and the position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub t: f64,
    pub j: usize,
    pub q: Vec<f64>,
}

/// A solution sampled on its hybrid time domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridArc {
    pub dim: usize,
    pub samples: Vec<ArcSample>,
    pub jumps: Vec<JumpEvent>,
}

impl HybridArc {
    pub(super) fn new(dim: usize) -> Self {
        Self { dim, samples: Vec::new(), jumps: Vec::new() }
    }

    pub(super) fn push(&mut self, t: f64, j: usize, state: &HybridState, energy: f64) {
        self.samples.push(ArcSample { t, j, state: state.clone(), energy });
    }

    pub(super) fn log_jump(&mut self, t: f64, j: usize, q: &DVector<f64>) {
        self.jumps.push(JumpEvent { t, j, q: q.iter().copied().collect() });
    }

    pub fn last(&self) -> &ArcSample {
        self.samples.last().expect("an arc holds at least its initial sample")
    }

    pub fn final_time(&self) -> f64 {
        self.last().t
    }

    /// Flow time between consecutive resets (the first interval starts at 0).
    pub fn dwell_times(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.jumps
            .iter()
            .map(|e| {
                let d = e.t - prev;
                prev = e.t;
                d
            })
            .collect()
    }

    /// `(t, j)` nondecreasing lexicographically and `j` stepping by one at
    /// every logged jump.
    pub fn is_well_ordered(&self) -> bool {
        let ordered = self.samples.windows(2).all(|w| {
            let (a, b) = (&w[0], &w[1]);
            (b.j == a.j && b.t >= a.t) || (b.j == a.j + 1 && b.t == a.t)
        });
        let counted = self.jumps.iter().enumerate().all(|(i, e)| e.j == i + 1);
        ordered && counted && self.last().j == self.jumps.len()
    }

    /// Columns `t, j, q0…, p0…, tau, energy`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,j");
        for i in 0..self.dim {
            let _ = write!(s, ",q{i}");
        }
        for i in 0..self.dim {
            let _ = write!(s, ",p{i}");
        }
        s.push_str(",tau,energy\n");
        for r in &self.samples {
            let _ = write!(s, "{:.16e},{}", r.t, r.j);
            for x in r.state.q.iter().chain(r.state.p.iter()) {
                let _ = write!(s, ",{x:.16e}");
            }
            let _ = writeln!(s, ",{:.16e},{:.16e}", r.state.tau, r.energy);
        }
        s
    }

    pub fn jumps_json(&self) -> String {
        serde_json::to_string_pretty(&self.jumps).expect("jump log serializes")
    }
}
