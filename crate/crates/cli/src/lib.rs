//! Command-line experiments for reset-based heavy-ball methods: rate
//! certification sweeps, trajectory studies on quadratics and logistic
//! regression, parameter tuning and continuous-time simulation.
//!
//! Every output is a pure function of the resolved configuration and seed,
//! which are written next to the results as `config.json`.

pub mod certify;
pub mod logreg;
pub mod methods;
pub mod plot;
pub mod problems;
pub mod quad;
pub mod simulate;
pub mod tune;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use hhb_core::lmi::LmiOptions;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::certify::{run_sweep, sweep_csv, sweep_svg, CertifyConfig, SweepRecord};
use crate::logreg::{run_logreg, LogregConfig};
use crate::methods::{parse_methods, Method, TuningRule};
use crate::quad::{run_quad, QuadConfig};
use crate::simulate::{energy_chart, run_simulate, SimulateConfig};
use crate::tune::{run_tune, TuneConfig, Tuned};

#[derive(Debug, Parser)]
#[command(name = "hhb", version, about = "Reset-based heavy-ball methods: certification, experiments and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Seed of every random draw; required by the randomized commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    pub out: PathBuf,
    /// JSON settings for the command (a bare settings object, or a previously
    /// written `config.json`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Comma-separated methods, e.g. `nesterov,hhb-nes`.
    #[arg(long, global = true)]
    pub methods: Option<String>,
    /// Comma-separated values of L (certify).
    #[arg(long = "grid-L", global = true)]
    pub grid_l: Option<String>,
    /// Tuning rule for certify: `mistuned` or `optimal`.
    #[arg(long, global = true)]
    pub tuning: Option<String>,
    /// Write the feasibility problem behind every certify row.
    #[arg(long = "dump-sdp", global = true)]
    pub dump_sdp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Certified rates over a grid of L.
    Certify,
    /// Trajectories on a random ill-conditioned quadratic.
    Quad,
    /// Tuned methods on logistic regression.
    Logreg,
    /// Tune stepsize and momentum for a budget.
    Tune,
    /// Simulate the continuous-time systems.
    Simulate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Certify => "certify",
            Command::Quad => "quad",
            Command::Logreg => "logreg",
            Command::Tune => "tune",
            Command::Simulate => "simulate",
        }
    }
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let grid = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad grid value `{t}`")))
        .collect::<Result<Vec<_>>>()?;
    if grid.is_empty() {
        bail!("grid is empty");
    }
    Ok(grid)
}

/// Splits a config file into settings and an optional seed.
fn load_settings(path: Option<&Path>) -> Result<(Option<Value>, Option<u64>)> {
    let Some(path) = path else { return Ok((None, None)) };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    match value {
        Value::Object(mut map) if map.contains_key("settings") => {
            let seed = map.get("seed").and_then(Value::as_u64);
            Ok((map.remove("settings"), seed))
        }
        other => Ok((Some(other), None)),
    }
}

fn settings<T: DeserializeOwned + Default>(value: Option<Value>, command: Command) -> Result<T> {
    match value {
        Some(v) => serde_json::from_value(v).with_context(|| format!("invalid settings for {}", command.name())),
        None => Ok(T::default()),
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn require_seed(seed: Option<u64>, command: Command) -> Result<u64> {
    seed.with_context(|| format!("{} draws random data; pass --seed or set it in the config", command.name()))
}

/// Rejects flags that do not apply to `command`.
fn check_flags(cli: &Cli) -> Result<()> {
    let certify_only = [("--grid-L", cli.grid_l.is_some()), ("--tuning", cli.tuning.is_some()), ("--dump-sdp", cli.dump_sdp)];
    if cli.command != Command::Certify {
        if let Some((flag, _)) = certify_only.iter().find(|(_, set)| *set) {
            bail!("{flag} applies only to certify");
        }
    }
    if cli.command == Command::Simulate && cli.methods.is_some() {
        bail!("--methods does not apply to simulate");
    }
    Ok(())
}

/// Warns when tuning gave HiHB (with `K_ = 0`) a different stepsize than Polyak.
pub fn compare_switched_stepsize(tuned: &[Tuned]) -> Option<f64> {
    let h = |m: Method| tuned.iter().find(|t| t.method == m).map(|t| t.h);
    let (a, b) = (h(Method::Polyak)?, h(Method::HihbPol)?);
    let rel = (a - b).abs() / a;
    if rel > 0.1 {
        log::warn!("tuned stepsizes differ: polyak h = {a:.4e}, hihb-pol h = {b:.4e}");
    }
    Some(rel)
}

/// Runs one command and writes its outputs under `cli.out`.
pub fn execute(cli: &Cli) -> Result<()> {
    check_flags(cli)?;
    let (value, file_seed) = load_settings(cli.config.as_deref())?;
    let seed = cli.seed.or(file_seed);
    let methods = cli.methods.as_deref().map(parse_methods).transpose()?;
    let out = &cli.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let resolved: Value = match cli.command {
        Command::Certify => {
            let mut cfg: CertifyConfig = settings(value, cli.command)?;
            if let Some(m) = methods {
                cfg.methods = m;
            }
            if let Some(g) = &cli.grid_l {
                cfg.grid_l = parse_grid(g)?;
            }
            if let Some(t) = &cli.tuning {
                cfg.tuning = t.parse::<TuningRule>()?;
            }
            cfg.dump_sdp |= cli.dump_sdp;
            let rows = run_sweep(&cfg, &LmiOptions::default())?;
            let records: Vec<SweepRecord> = rows.iter().map(SweepRecord::from).collect();
            write(out, "sweep.csv", &sweep_csv(&records))?;
            write(out, "sweep.svg", &sweep_svg(&records))?;
            let certs: Vec<Value> = rows
                .iter()
                .map(|r| json!({ "L": r.lipschitz, "method": r.method, "rho": r.rho, "certificate": r.certificate }))
                .collect();
            write(out, "certificates.json", &to_json(&certs))?;
            if cfg.dump_sdp {
                for r in &rows {
                    let probe = r.probe.as_ref().expect("every row keeps a probe");
                    let dump = json!({ "problem": probe.problem, "result": probe.result });
                    write(out, &format!("sdp/{}_L{}.json", r.method, r.lipschitz), &to_json(&dump))?;
                }
            }
            serde_json::to_value(&cfg)?
        }
        Command::Quad => {
            let seed = require_seed(seed, cli.command)?;
            let mut cfg: QuadConfig = settings(value, cli.command)?;
            if let Some(m) = methods {
                cfg.methods = m;
            }
            let runs = run_quad(&cfg, seed)?;
            write(out, "summary.csv", &quad::summary_csv(&runs))?;
            for r in &runs {
                write(out, &format!("trajectories/seed{}_K{}_{}.csv", r.seed, r.k, r.method), &r.trajectory.to_csv())?;
            }
            for chunk in runs.chunks(cfg.methods.len()) {
                let refs: Vec<_> = chunk.iter().collect();
                write(out, &format!("gaps_seed{}_K{}.svg", chunk[0].seed, chunk[0].k), &quad::gap_chart(&refs))?;
            }
            serde_json::to_value(&cfg)?
        }
        Command::Logreg => {
            let seed = require_seed(seed, cli.command)?;
            let mut cfg: LogregConfig = settings(value, cli.command)?;
            if let Some(m) = methods {
                cfg.methods = m;
            }
            let runs = run_logreg(&cfg, seed)?;
            let tuned: Vec<Tuned> = runs.iter().map(|r| r.tuned.clone()).collect();
            compare_switched_stepsize(&tuned);
            write(out, "summary.csv", &logreg::summary_csv(&runs))?;
            write(out, "tuned.json", &to_json(&tuned))?;
            for r in &runs {
                write(out, &format!("trajectories/{}.csv", r.tuned.method), &r.trajectory.to_csv())?;
            }
            write(out, "gaps.svg", &logreg::gap_chart(&runs))?;
            serde_json::to_value(&cfg)?
        }
        Command::Tune => {
            let seed = require_seed(seed, cli.command)?;
            let mut cfg: TuneConfig = settings(value, cli.command)?;
            if let Some(m) = methods {
                cfg.methods = m;
            }
            let tuned = run_tune(&cfg, seed)?;
            compare_switched_stepsize(&tuned);
            write(out, "tuned.json", &to_json(&tuned))?;
            serde_json::to_value(&cfg)?
        }
        Command::Simulate => {
            let cfg: SimulateConfig = settings(value, cli.command)?;
            let seed = if cfg.problem.is_random() { Some(require_seed(seed, cli.command)?) } else { seed };
            let sim = run_simulate(&cfg, seed.unwrap_or(0))?;
            write(out, "arc.csv", &sim.arc.to_csv())?;
            write(out, "jumps.json", &(sim.arc.jumps_json() + "\n"))?;
            write(out, "energy.svg", &energy_chart(&sim))?;
            serde_json::to_value(&cfg)?
        }
    };
    let record = json!({ "command": cli.command.name(), "seed": seed, "settings": resolved });
    write(out, "config.json", &to_json(&record))
}
