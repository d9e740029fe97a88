//! Rate-certificate sweeps over `L`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use hhb_core::lmi::dt::DtRequest;
use hhb_core::lmi::{BisectOutcome, Certificate, LmiOptions, LmiOutcome};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::methods::{tuning, Method, TuningRule, Tuning};
use crate::plot::{Chart, Series};

pub const UNCERTIFIED: &str = "uncertified";
pub const SWEEP_HEADER: &str = "L,mu,h,beta_hi,beta_lo,method,rho";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyConfig {
    pub mu: f64,
    pub grid_l: Vec<f64>,
    pub methods: Vec<Method>,
    pub tuning: TuningRule,
    /// Halvings after the bracketing scan.
    pub bisection_iters: usize,
    /// Also write the feasibility problem behind every row.
    pub dump_sdp: bool,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            mu: 1.0,
            grid_l: vec![1.0, 10.0, 25.0, 50.0, 75.0, 100.0],
            methods: Method::CERTIFIABLE.to_vec(),
            tuning: TuningRule::Mistuned,
            bisection_iters: 24,
            dump_sdp: false,
        }
    }
}

impl CertifyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_l.is_empty() || self.methods.is_empty() {
            bail!("certify needs a nonempty L grid and method list");
        }
        if !(self.mu > 0.0) {
            bail!("μ must be positive, got {}", self.mu);
        }
        if let Some(l) = self.grid_l.iter().find(|&&l| !(l >= self.mu) || !l.is_finite()) {
            bail!("every L must be finite and at least μ = {}, got {l}", self.mu);
        }
        if let Some(m) = self.methods.iter().find(|m| m.discretization().is_none()) {
            bail!("{m} has no rate certificate");
        }
        Ok(())
    }
}

/// One grid point: the tuning used and the smallest certified `ρ`.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub lipschitz: f64,
    pub mu: f64,
    pub method: Method,
    pub tuning: Tuning,
    pub rho: Option<f64>,
    pub certificate: Option<Certificate>,
    /// The probe behind `certificate`, or the `ρ = 1` probe when uncertified.
    pub probe: Option<LmiOutcome>,
}

pub fn request(method: Method, tuning: &Tuning, mu: f64, lipschitz: f64) -> Result<DtRequest> {
    let discretization = method.discretization().with_context(|| format!("{method} has no rate certificate"))?;
    Ok(DtRequest { n: 1, h: tuning.h, beta_hi: tuning.beta_hi, beta_lo: tuning.beta_lo, discretization, mu, lipschitz })
}

pub fn certify_point(method: Method, rule: TuningRule, mu: f64, lipschitz: f64, iters: usize, opts: &LmiOptions) -> Result<SweepRow> {
    let t = tuning(rule, method, mu, lipschitz)?;
    let req = request(method, &t, mu, lipschitz)?;
    let out: BisectOutcome = req.certify(iters, opts).with_context(|| format!("certifying {method} at L = {lipschitz}"))?;
    let probe = match out.best {
        Some(p) => Some(p),
        None => Some(req.probe(1.0, opts)?),
    };
    Ok(SweepRow { lipschitz, mu, method, tuning: t, rho: out.rate, certificate: out.certificate, probe })
}

/// Every `(L, method)` pair, ordered by `L` then by the configured method order.
pub fn run_sweep(cfg: &CertifyConfig, opts: &LmiOptions) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let points: Vec<(f64, Method)> = cfg.grid_l.iter().flat_map(|&l| cfg.methods.iter().map(move |&m| (l, m))).collect();
    points
        .par_iter()
        .map(|&(l, m)| {
            let row = certify_point(m, cfg.tuning, cfg.mu, l, cfg.bisection_iters, opts)?;
            log::info!("{m} L={l}: {}", row.rho.map_or(UNCERTIFIED.to_string(), |r| format!("ρ = {r:.6}")));
            Ok(row)
        })
        .collect()
}

/// The plotted content of a row, as read back from the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    #[serde(rename = "L")]
    pub lipschitz: f64,
    pub mu: f64,
    pub h: f64,
    pub beta_hi: f64,
    pub beta_lo: f64,
    pub method: Method,
    pub rho: Option<f64>,
}

impl From<&SweepRow> for SweepRecord {
    fn from(r: &SweepRow) -> Self {
        Self {
            lipschitz: r.lipschitz,
            mu: r.mu,
            h: r.tuning.h,
            beta_hi: r.tuning.beta_hi,
            beta_lo: r.tuning.beta_lo,
            method: r.method,
            rho: r.rho,
        }
    }
}

pub fn sweep_csv(records: &[SweepRecord]) -> String {
    let mut s = format!("{SWEEP_HEADER}\n");
    for r in records {
        let rho = r.rho.map_or(UNCERTIFIED.to_string(), |v| format!("{v:.16e}"));
        let _ = writeln!(s, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{rho}", r.lipschitz, r.mu, r.h, r.beta_hi, r.beta_lo, r.method);
    }
    s
}

pub fn read_sweep_csv(text: &str) -> Result<Vec<SweepRecord>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != SWEEP_HEADER {
        bail!("unexpected sweep header `{}`", header.join(","));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let num = |j: usize| -> Result<f64> { rec[j].parse().with_context(|| format!("row {}: bad number `{}`", i + 1, &rec[j])) };
        let rho = match &rec[6] {
            UNCERTIFIED => None,
            v => Some(v.parse().with_context(|| format!("row {}: bad rate `{v}`", i + 1))?),
        };
        out.push(SweepRecord { lipschitz: num(0)?, mu: num(1)?, h: num(2)?, beta_hi: num(3)?, beta_lo: num(4)?, method: rec[5].parse()?, rho });
    }
    Ok(out)
}

/// `ρ` against `L`, one curve per method; uncertified points are gaps.
pub fn sweep_svg(records: &[SweepRecord]) -> String {
    let mut by_method: BTreeMap<Method, Vec<(f64, f64)>> = BTreeMap::new();
    for r in records {
        by_method.entry(r.method).or_default().push((r.lipschitz, r.rho.unwrap_or(f64::NAN)));
    }
    let mut chart = Chart::new("Certified rate", "L", "rho", false);
    for (m, mut pts) in by_method {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        chart = chart.with_series(Series::new(m.name(), pts));
    }
    chart.to_svg()
}
