//! Method names, tuning rules and their mapping onto core parameters.

use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Result};
use hhb_core::discrete::{AlgoParams, Variant};
use hhb_core::lmi::Discretization;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Gd,
    Nesterov,
    HhbNes,
    HihbNes,
    Polyak,
    HhbPol,
    HihbPol,
}

/// How `β_` relates to `β̄` for a momentum method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Gradient,
    /// `β_ = β̄`.
    Classic,
    /// `β_ = 0`.
    Reset,
    /// `β_ < β̄`, heavier damping when momentum points uphill.
    Switched,
}

impl Method {
    pub const ALL: [Method; 7] =
        [Method::Gd, Method::Nesterov, Method::HhbNes, Method::HihbNes, Method::Polyak, Method::HhbPol, Method::HihbPol];
    /// Momentum methods with a rate LMI.
    pub const CERTIFIABLE: [Method; 6] =
        [Method::Nesterov, Method::HhbNes, Method::HihbNes, Method::Polyak, Method::HhbPol, Method::HihbPol];
    pub const QUAD_DEFAULT: [Method; 6] =
        [Method::Polyak, Method::Nesterov, Method::HhbPol, Method::HhbNes, Method::HihbPol, Method::HihbNes];
    pub const LOGREG_DEFAULT: [Method; 5] = [Method::Gd, Method::Polyak, Method::Nesterov, Method::HhbPol, Method::HihbPol];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gd => "gd",
            Method::Nesterov => "nesterov",
            Method::HhbNes => "hhb-nes",
            Method::HihbNes => "hihb-nes",
            Method::Polyak => "polyak",
            Method::HhbPol => "hhb-pol",
            Method::HihbPol => "hihb-pol",
        }
    }

    pub fn family(self) -> Family {
        match self {
            Method::Gd => Family::Gradient,
            Method::Nesterov | Method::Polyak => Family::Classic,
            Method::HhbNes | Method::HhbPol => Family::Reset,
            Method::HihbNes | Method::HihbPol => Family::Switched,
        }
    }

    pub fn discretization(self) -> Option<Discretization> {
        match self {
            Method::Gd => None,
            Method::Nesterov | Method::HhbNes | Method::HihbNes => Some(Discretization::Nesterov),
            Method::Polyak | Method::HhbPol | Method::HihbPol => Some(Discretization::Polyak),
        }
    }

    pub fn variant(self) -> Variant {
        match self.discretization() {
            None => Variant::Gd,
            Some(Discretization::Nesterov) => Variant::Nes,
            Some(Discretization::Polyak) => Variant::Pol,
        }
    }

    /// The time-invariant method a hybrid variant modifies.
    pub fn classic(self) -> Method {
        match self.discretization() {
            None => Method::Gd,
            Some(Discretization::Nesterov) => Method::Nesterov,
            Some(Discretization::Polyak) => Method::Polyak,
        }
    }

    /// Discrete parameters for damping `K` at step `ε`; `k_hi` is `K̄` of the
    /// switched variants (ignored otherwise).
    pub fn params_from_damping(self, eps: f64, k: f64, k_hi: f64) -> Result<AlgoParams> {
        let v = self.variant();
        Ok(match self.family() {
            Family::Gradient => AlgoParams::gradient_descent(eps * eps)?,
            Family::Classic => AlgoParams::heavy_ball(eps, k, v)?,
            Family::Reset => AlgoParams::hhb(eps, k, v)?,
            Family::Switched => AlgoParams::hihb(eps, k, k_hi, v)?,
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match Method::ALL.into_iter().find(|m| m.name() == s.trim()) {
            Some(m) => Ok(m),
            None => {
                let known: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                bail!("unknown method `{s}`; expected one of {}", known.join(", "))
            }
        }
    }
}

/// Parses a comma-separated method list.
pub fn parse_methods(s: &str) -> Result<Vec<Method>> {
    let list = s.split(',').filter(|t| !t.trim().is_empty()).map(Method::from_str).collect::<Result<Vec<_>>>()?;
    if list.is_empty() {
        bail!("method list is empty");
    }
    Ok(list)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TuningRule {
    /// `h = 1/(2L)`, `β̄ = 1 − 0.1√h`: stepsize too small, momentum too large.
    Mistuned,
    /// Rate-optimal `(h, β)` for the method's discretization given `(μ, L)`.
    Optimal,
}

impl FromStr for TuningRule {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mistuned" => Ok(TuningRule::Mistuned),
            "optimal" => Ok(TuningRule::Optimal),
            _ => bail!("unknown tuning rule `{s}`; expected mistuned or optimal"),
        }
    }
}

/// `(h, β̄, β_)` of one method at one `(μ, L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    pub h: f64,
    pub beta_hi: f64,
    pub beta_lo: f64,
}

pub fn nesterov_optimal(mu: f64, lipschitz: f64) -> (f64, f64) {
    let (a, b) = (lipschitz.sqrt(), mu.sqrt());
    (1.0 / lipschitz, (a - b) / (a + b))
}

pub fn polyak_optimal(mu: f64, lipschitz: f64) -> (f64, f64) {
    let (a, b) = (lipschitz.sqrt(), mu.sqrt());
    (4.0 / (a + b).powi(2), ((a - b) / (a + b)).powi(2))
}

pub fn mistuned(lipschitz: f64) -> (f64, f64) {
    let h = 1.0 / (2.0 * lipschitz);
    (h, 1.0 - 0.1 * h.sqrt())
}

/// Applies `rule` to a momentum method. The switched variants use
/// `β_ = min(1 − √h, β̄)`.
pub fn tuning(rule: TuningRule, method: Method, mu: f64, lipschitz: f64) -> Result<Tuning> {
    let Some(disc) = method.discretization() else {
        bail!("no momentum tuning rule for {method}");
    };
    let (h, beta) = match (rule, disc) {
        (TuningRule::Mistuned, _) => mistuned(lipschitz),
        (TuningRule::Optimal, Discretization::Nesterov) => nesterov_optimal(mu, lipschitz),
        (TuningRule::Optimal, Discretization::Polyak) => polyak_optimal(mu, lipschitz),
    };
    let beta_lo = match method.family() {
        Family::Classic => beta,
        Family::Reset => 0.0,
        Family::Switched => (1.0 - h.sqrt()).min(beta),
        Family::Gradient => unreachable!("handled above"),
    };
    Ok(Tuning { h, beta_hi: beta, beta_lo })
}
