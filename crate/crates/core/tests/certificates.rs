//! Rate certificates: known rates, cross-checks against the single-branch
//! conditions, lifting to higher dimension, and trajectory audits.

use hhb_core::discrete::{AlgoParams, Variant};
use hhb_core::lmi::baseline::{baseline_certify, baseline_feasible, ScalarMethod};
use hhb_core::lmi::ct::{build_ct, condition_number, ct_feasible, CtInput};
use hhb_core::lmi::dt::{reduce_to_scalar, DtRequest};
use hhb_core::lmi::{audit_certificate, bisect_rate, AuditReport, Certificate, Direction, Discretization, LmiOptions};
use hhb_core::objectives::{gen_random_quadratic, ObjectiveModel, QuadraticSpec};
use hhb_core::sdp::{symmetric_eig, FeasStatus};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

const ITERS: usize = 24;

fn opts() -> LmiOptions {
    LmiOptions::default()
}

fn request(h: f64, beta_hi: f64, beta_lo: f64, disc: Discretization, lipschitz: f64) -> DtRequest {
    DtRequest { n: 1, h, beta_hi, beta_lo, discretization: disc, mu: 1.0, lipschitz }
}

fn nesterov_optimal(l: f64) -> (f64, f64) {
    (1.0 / l, (l.sqrt() - 1.0) / (l.sqrt() + 1.0))
}

fn polyak_optimal(l: f64) -> (f64, f64) {
    (4.0 / (l.sqrt() + 1.0).powi(2), ((l.sqrt() - 1.0) / (l.sqrt() + 1.0)).powi(2))
}

fn mistuned(l: f64) -> (f64, f64) {
    let h = 1.0 / (2.0 * l);
    (h, 1.0 - 0.1 * h.sqrt())
}

/// Quadratic with spectrum in `[1, L]` and minimizer at the origin.
fn centered_quadratic(n: usize, l: f64, seed: u64) -> ObjectiveModel {
    let (spec, _) = gen_random_quadratic(n, l, seed).unwrap();
    QuadraticSpec::new(spec.q, DVector::zeros(n)).unwrap().into_model_with(1.0, l).unwrap()
}

fn audit_over_seeds(cert: &Certificate, params: &AlgoParams, l: f64, n: usize, seeds: u64) -> AuditReport {
    (0..seeds)
        .map(|seed| {
            let model = centered_quadratic(n, l, seed);
            let mut rng = Xoshiro256StarStar::seed_from_u64(seed ^ 0x5eed);
            let q0 = DVector::from_fn(n, |_, _| rng.gen_range(-100.0..100.0));
            audit_certificate(cert, &model, params, &q0, 1000).unwrap()
        })
        .reduce(AuditReport::merge)
        .unwrap()
}

#[test]
fn nesterov_rate_recovered() {
    let (h, beta) = nesterov_optimal(10.0);
    let out = request(h, beta, beta, Discretization::Nesterov, 10.0).certify(ITERS, &opts()).unwrap();
    let rho = out.rate.expect("certified");
    assert!(rho * rho <= 1.0 - 0.1f64.sqrt() + 0.02, "ρ² = {}", rho * rho);
    assert!(!out.non_monotone);
}

#[test]
fn gradient_descent_certified_at_unit_rate() {
    for l in [2.0, 10.0, 100.0] {
        let req = request(1.0 / l, 0.0, 0.0, Discretization::Polyak, l);
        assert!(req.probe(1.0, &opts()).unwrap().is_feasible(), "L = {l}");
        let m = ScalarMethod { h: 1.0 / l, beta: 0.0, discretization: Discretization::Polyak };
        assert!(baseline_feasible(m, 1.0, l, 1.0, &opts()).unwrap().is_feasible());
    }
}

#[test]
fn time_invariant_case_matches_single_branch_conditions() {
    for l in [2.0, 10.0, 50.0] {
        for disc in [Discretization::Polyak, Discretization::Nesterov] {
            let tuning = match disc {
                Discretization::Polyak => polyak_optimal(l),
                Discretization::Nesterov => nesterov_optimal(l),
            };
            for (h, beta) in [tuning, mistuned(l)] {
                let two = request(h, beta, beta, disc, l).certify(ITERS, &opts()).unwrap();
                let m = ScalarMethod { h, beta, discretization: disc };
                let one = baseline_certify(m, 1.0, l, ITERS, &opts()).unwrap();
                match (two.rate, one.rate) {
                    (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-3, "{disc:?} L={l}: {a} vs {b}"),
                    (None, None) => {}
                    other => panic!("{disc:?} L={l} h={h}: verdicts differ {other:?}"),
                }
                for rho in [0.5, 0.9, 0.99, 1.0] {
                    let a = request(h, beta, beta, disc, l).probe(rho, &opts()).unwrap().status();
                    let b = baseline_feasible(m, 1.0, l, rho, &opts()).unwrap().status();
                    assert_eq!(a, b, "{disc:?} L={l} h={h} ρ={rho}");
                    assert_ne!(a, FeasStatus::Indeterminate);
                }
            }
        }
    }
}

#[test]
fn mistuned_hybrid_nesterov_beats_nesterov() {
    let l = 100.0;
    let (h, beta) = mistuned(l);
    let nes = request(h, beta, beta, Discretization::Nesterov, l).certify(ITERS, &opts()).unwrap();
    let hhb = request(h, beta, 0.0, Discretization::Nesterov, l).certify(ITERS, &opts()).unwrap();
    assert!(hhb.rate.unwrap() < nes.rate.unwrap());
}

#[test]
fn scalar_reduction_gives_the_same_certificate() {
    let (h, beta) = nesterov_optimal(10.0);
    let big = DtRequest { n: 5, ..request(h, beta, 0.0, Discretization::Nesterov, 10.0) };
    assert_eq!(reduce_to_scalar(&big).n, 1);
    let one = reduce_to_scalar(&big).probe(0.95, &opts()).unwrap().certificate.unwrap();
    let five = big.probe(0.95, &opts()).unwrap().certificate.unwrap();
    assert_eq!(one, five);
    assert_eq!(one.lifted_p(5).shape(), (10, 10));
}

#[test]
fn polyak_form_certificates_are_sound_along_trajectories() {
    for l in [2.0, 4.0] {
        let (h, beta) = polyak_optimal(l);
        for beta_lo in [beta, 0.0] {
            let out = request(h, beta, beta_lo, Discretization::Polyak, l).certify(ITERS, &opts()).unwrap();
            let cert = out.certificate.expect("certified");
            let params = AlgoParams::from_stepsize(h, beta_lo, beta, Variant::Pol).unwrap();
            let report = audit_over_seeds(&cert, &params, l, 5, 20);
            assert!(report.v_nonincreasing(1e-8), "L={l} β_={beta_lo}: {report:?}");
            assert!(report.bound_holds(1e-6), "L={l} β_={beta_lo}: {report:?}");
        }
    }
}

#[test]
fn time_invariant_nesterov_certificate_is_sound() {
    for (l, (h, beta)) in [(10.0, nesterov_optimal(10.0)), (25.0, mistuned(25.0))] {
        let cert = request(h, beta, beta, Discretization::Nesterov, l).certify(ITERS, &opts()).unwrap().certificate.unwrap();
        let params = AlgoParams::from_stepsize(h, beta, beta, Variant::Nes).unwrap();
        let report = audit_over_seeds(&cert, &params, l, 5, 20);
        assert!(report.v_nonincreasing(1e-8), "{report:?}");
        assert!(report.bound_holds(1e-6), "{report:?}");
    }
}

#[test]
fn switched_nesterov_certificate_bounds_the_gap() {
    // Only the rate bound is asserted: the switching law tests ∇φ(q_k) while
    // the nominal-branch condition reasons about ∇φ at the extrapolated point,
    // so V_k itself need not decrease on every step.
    for l in [10.0, 100.0] {
        let (h, beta) = mistuned(l);
        let cert = request(h, beta, 0.0, Discretization::Nesterov, l).certify(ITERS, &opts()).unwrap().certificate.unwrap();
        let params = AlgoParams::from_stepsize(h, 0.0, beta, Variant::Nes).unwrap();
        let report = audit_over_seeds(&cert, &params, l, 5, 20);
        assert!(report.bound_holds(1e-6), "{report:?}");
    }
}

#[test]
fn lifted_certificate_holds_in_higher_dimension() {
    let (h, beta) = polyak_optimal(2.0);
    let cert = request(h, beta, 0.0, Discretization::Polyak, 2.0).probe(0.5, &opts()).unwrap().certificate.unwrap();
    let params = AlgoParams::from_stepsize(h, 0.0, beta, Variant::Pol).unwrap();
    for n in [2, 5, 9] {
        let report = audit_over_seeds(&cert, &params, 2.0, n, 5);
        assert!(report.v_nonincreasing(1e-8) && report.bound_holds(1e-6), "n = {n}: {report:?}");
    }
}

#[test]
fn certificate_contract() {
    let (h, beta) = nesterov_optimal(10.0);
    let out = request(h, beta, 0.3, Discretization::Nesterov, 10.0).probe(0.95, &opts()).unwrap();
    let cert = out.certificate.unwrap();
    assert!(cert.margin <= -opts().margin);
    assert!(symmetric_eig(&cert.p_matrix()).unwrap().min() >= opts().margin / 2.0);
    for name in ["a", "lambda", "lambda_r", "sigma", "sigma_r"] {
        assert!(cert.multiplier(name).unwrap() >= opts().floor);
    }
    let json = cert.to_json();
    for key in ["\"rate\"", "\"rate_kind\": \"rho\"", "\"P\"", "\"multipliers\"", "\"margin\"", "\"tuning\""] {
        assert!(json.contains(key), "{key} missing from {json}");
    }
    let back: Certificate = serde_json::from_str(&json).unwrap();
    assert_eq!(back, cert);
}

#[test]
fn bisection_contracts() {
    // feasible everywhere: converge to the lower end
    let gd = request(0.1, 0.0, 0.0, Discretization::Polyak, 10.0);
    let feasible = gd.probe(1.0, &opts()).unwrap();
    let out = bisect_rate(|_| Ok(feasible.clone()), 0.2, 0.8, 30, Direction::FeasibleAbove).unwrap();
    assert!((out.rate.unwrap() - 0.2).abs() < 1e-12);
    // infeasible everywhere: no certificate
    let (h, beta) = mistuned(100.0);
    let infeasible = request(h, beta, beta, Discretization::Polyak, 100.0).probe(1.0, &opts()).unwrap();
    assert_eq!(infeasible.status(), FeasStatus::Infeasible);
    let out = bisect_rate(|_| Ok(infeasible.clone()), 0.2, 0.8, 30, Direction::FeasibleAbove).unwrap();
    assert!(out.rate.is_none() && out.certificate.is_none());
    assert!(bisect_rate(|_| Ok(infeasible.clone()), 0.8, 0.2, 3, Direction::FeasibleAbove).is_err());
}

#[test]
fn continuous_time_input_as_written_is_not_certified() {
    let data = build_ct(1.0, 1, 1.0, 10.0, CtInput::AsWritten).unwrap();
    for alpha in [1e-6, 1e-3, 0.1, 1.0, 100.0] {
        assert!(!ct_feasible(&data, alpha, 1e-3, &opts()).unwrap().is_feasible(), "α = {alpha}");
    }
}

#[test]
fn continuous_time_substituted_input_is_certified_for_mild_conditioning() {
    let data = build_ct(1.0, 1, 1.0, 2.0, CtInput::Substituted).unwrap();
    let out = bisect_rate(|a| ct_feasible(&data, a, 1e-3, &opts()), 1e-6, 100.0, 12, Direction::FeasibleBelow).unwrap();
    let cert = out.certificate.expect("feasible for L/μ = 2");
    let p = cert.p_matrix();
    assert!(symmetric_eig(&p).unwrap().min() >= opts().margin / 2.0);
    let alpha = out.rate.unwrap();
    assert!((cert.rate - alpha / condition_number(&p)).abs() <= 1e-12);
    assert_eq!(cert.multiplier("eps"), Some(1e-3));
}

#[test]
fn audit_stops_at_the_underflow_range() {
    // at L = μ the certified rate is small enough that c·ρ^{2k} leaves the
    // representable range long before 1000 steps
    let (h, beta) = mistuned(1.0);
    let cert = request(h, beta, beta, Discretization::Nesterov, 1.0).certify(ITERS, &opts()).unwrap().certificate.unwrap();
    let params = AlgoParams::from_stepsize(h, beta, beta, Variant::Nes).unwrap();
    let report = audit_over_seeds(&cert, &params, 1.0, 5, 20);
    assert!(report.steps > 100 && report.steps < 1000, "{report:?}");
    assert!(report.v_nonincreasing(1e-8) && report.bound_holds(1e-6), "{report:?}");
}
