use std::sync::Arc;

use dss_core::estimates::*;
use dss_core::field::StripField;
use dss_core::grid::{GridSpec, StripGrid};
use dss_core::initial_data::HolderClass;
use dss_core::lattice::LatticeField;
use dss_core::solver::{AprioriReport, SolveResult, SolveStatus};
use dss_core::stokes::QuadratureSpec;
use dss_core::vec3::{norm, Vec3};
use dss_core::Error;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn grid() -> Arc<StripGrid> {
    Arc::new(
        StripGrid::new(&GridSpec {
            lambda: 2.0,
            shells_per_period: 2,
            rho_min: -1.0,
            rho_max: 3.5,
            n_theta: 2,
            n_phi: 4,
            n_time: 3,
        })
        .unwrap(),
    )
}

/// Values of `4 pi int_0^1 int_0^inf rho^2 (rho + sqrt(1-t))^{-a} (rho + sqrt t)^{-b}`
/// from 30-digit tanh-sinh quadrature (mpmath), an implementation
/// independent of the one under test.
const ANCHORS: [(f64, f64, f64); 3] = [
    (4.0, 2.0, 2.550_172_469_530_785_8),
    (3.0, 3.0, 1.863_136_402_606_909_9),
    (4.0, 3.0, 2.094_395_102_393_195_5),
];

#[test]
fn phi_at_origin_matches_independent_quadrature() {
    for (a, b, want) in ANCHORS {
        let got = phi_cal(&[0.0; 3], a, b, &CalSpec::default()).unwrap();
        assert!(rel(got.value, want) < 1e-6, "phi(0,{a},{b}) = {} vs {want}", got.value);
        let fine = phi_cal(&[0.0; 3], a, b, &CalSpec::default().refined()).unwrap();
        assert!(rel(fine.value, got.value) < 1e-6);
    }
}

#[test]
fn phi_is_rotation_invariant_and_symmetric_in_its_exponents() {
    let spec = CalSpec::default();
    for (r, a, b) in [(1.5, 4.0, 2.0), (10.0, 4.0, 2.5), (0.7, 3.0, 3.5)] {
        let e1 = phi_cal(&[r, 0.0, 0.0], a, b, &spec).unwrap().value;
        let rotated = phi_cal(&[0.0, 0.6 * r, -0.8 * r], a, b, &spec).unwrap().value;
        assert!(rel(rotated, e1) < 1e-6);
        let swapped = phi_cal(&[r, 0.0, 0.0], b, a, &spec).unwrap().value;
        assert!(rel(swapped, e1) < 1e-6, "swap at {r}: {swapped} vs {e1}");
    }
}

#[test]
fn phi_rejects_parameters_outside_the_hypotheses() {
    for (a, b) in [(5.0, 1.0), (0.0, 4.0), (1.0, 2.0), (2.0, 5.5)] {
        assert!(matches!(phi_cal(&[1.0, 0.0, 0.0], a, b, &CalSpec::default()), Err(Error::Argument(_))));
    }
    assert!(phi_cal_bound_check(4.0, 3.0, &[0.0, 10.0], &CalSpec::default()).is_err());
}

#[test]
fn bound_expression() {
    let r = 3.0;
    let big: f64 = 5.0;
    assert!(rel(cal_bound(r, 4.0, 2.0, true), big.powi(-4) + big.powi(-2) + big.powi(-3)) < 1e-15);
    let with = cal_bound(r, 3.0, 3.0, true);
    let without = cal_bound(r, 3.0, 3.0, false);
    assert!(rel(with - without, 2.0 * big.powi(-3) * big.ln()) < 1e-14);
}

#[test]
fn bound_ratio_is_stable_and_log_is_needed_on_the_diagonal() {
    let radii = cal_radius_sweep(3);
    for (a, b) in [(4.0, 3.0), (4.0, 2.5)] {
        let rep = phi_cal_bound_check(a, b, &radii, &CalSpec::default()).unwrap();
        assert!(rep.passed(), "({a},{b}) {:?}", rep.stability());
        assert!(rep.fitted_constant > 0.0);
    }
    let rep = phi_cal_bound_check(3.0, 3.0, &radii, &CalSpec::default()).unwrap();
    assert!(rep.passed(), "{:?}", rep.checks);
    assert_eq!(rep.checks, vec![("log_factor_necessary".to_string(), true)]);
    // the plain R^{-3} fit keeps growing like log R
    let plain: Vec<f64> = rep
        .samples
        .iter()
        .map(|s| s.measured / cal_bound(s.params[0].1, 3.0, 3.0, false))
        .collect();
    assert!(plain.last().unwrap() > &(1.2 * plain[plain.len() / 2]));
}

#[test]
fn slope_fit_recovers_lines() {
    let xs: Vec<f64> = (0..10).map(|k| k as f64 * 0.3).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 2.5 * x).collect();
    let f = fit_slope(&xs, &ys).unwrap();
    assert!((f.slope + 2.5).abs() < 1e-13 && f.stderr < 1e-12);
    let noisy: Vec<f64> = ys.iter().enumerate().map(|(k, y)| y + if k % 2 == 0 { 0.01 } else { -0.01 }).collect();
    let g = fit_slope(&xs, &noisy).unwrap();
    assert!(g.stderr > 0.0 && (g.slope + 2.5).abs() < 3.0 * g.stderr + 1e-3);
    assert!(fit_slope(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).is_none());
}

#[test]
fn holder_seminorm_of_constant_and_power_fields() {
    let probes = vec![([1.0, 0.5, -0.3], 1.5), ([3.0, 0.0, 0.0], 1.0)];
    let flat = holder_seminorm(|_, _| [1.0, -2.0, 0.5], 0.4, &probes).unwrap();
    assert!(flat.values.iter().all(|v| *v == 0.0));
    assert_eq!(flat.weighted_sup, 0.0);

    // |x - x0|^theta e has seminorm exactly 1 at x0
    for theta in [0.3, 0.7] {
        let x0: Vec3 = [1.0, 0.5, -0.3];
        let audit = holder_seminorm(
            |x, _| {
                let d = norm(&[x[0] - x0[0], x[1] - x0[1], x[2] - x0[2]]).powf(theta);
                [d, 0.0, 0.0]
            },
            theta,
            &[(x0, 1.5)],
        )
        .unwrap();
        assert!((audit.values[0] - 1.0).abs() < 0.2, "{}", audit.values[0]);
    }
    assert!(holder_seminorm(|_, _| [0.0; 3], 1.0, &probes).is_err());
    assert_eq!(holder_offsets(4.0).len(), 48);
    assert!(holder_offsets(4.0).iter().all(|o| o.2 <= 0.2 + 1e-15));
}

#[test]
fn dss_detector_accepts_self_similar_and_flags_broken_fields() {
    let probes = parabolic_probes(40);
    let ss = |x: &Vec3, t: f64| Ok([x[0], x[1], x[2]].map(|c| c / (norm(x).powi(2) + t)));
    for lambda in [1.3, 2.0, 3.7] {
        assert!(dss_invariance_check(ss, lambda, 0.5, &probes).unwrap() < 1e-14);
    }
    let broken = |x: &Vec3, t: f64| {
        let r = norm(x);
        let tail = 1e-3 * (r / (1.0 + r)).powi(2);
        Ok([x[0], x[1], x[2]].map(|c| c / (r * r + t) + tail))
    };
    assert!(dss_invariance_check(broken, 2.0, 0.5, &probes).unwrap() > 1e-4);
    assert!(dss_invariance_check(ss, 1.0, 0.5, &probes).is_err());
}

fn zero_run(g: Arc<StripGrid>, converged: bool) -> SolveResult {
    SolveResult {
        v: StripField::zeros(g, 0.5),
        sigma: 0.0,
        residual_history: vec![0.0],
        final_residual: 0.0,
        iterations: 1,
        converged,
        status: if converged { SolveStatus::Converged } else { SolveStatus::IterationBudget },
        apriori: AprioriReport { c_u: 0.0, c_v_quadratic: 0.0, c_v_gamma: 0.0, finite: true },
        error_estimate: 0.0,
        warnings: vec![],
    }
}

#[test]
fn solution_audit_of_the_trivial_run_and_refusal() {
    let g = grid();
    let heat = LatticeField::<3>::zeros(g.clone(), 1);
    let run = zero_run(g.clone(), true);
    let reports = solution_decay_check(
        Run { result: &run, heat: &heat },
        Some(Run { result: &run, heat: &heat }),
        HolderClass::OneBeta(0.5),
    )
    .unwrap();
    assert_eq!(reports.len(), 5);
    for r in &reports {
        assert_eq!(r.fitted_constant, 0.0, "{}", r.name);
        assert!(r.passed());
    }
    let gamma_only =
        solution_decay_check(Run { result: &run, heat: &heat }, None, HolderClass::Gamma(0.5)).unwrap();
    assert_eq!(gamma_only.len(), 2);
    assert!(gamma_only.iter().all(|r| !r.passed()), "no refinement, no pass");

    let bad = zero_run(g, false);
    assert!(matches!(
        solution_decay_check(Run { result: &bad, heat: &heat }, None, HolderClass::Gamma(0.5)),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn reports_serialise_samples_and_verdicts() {
    let samples = vec![
        Sample { params: vec![("r".into(), 1.0)], measured: 2.0, bound: 4.0 },
        Sample { params: vec![("r".into(), 2.0)], measured: 1.0, bound: 1.0 },
    ];
    let mut rep = EstimateReport::new("demo", samples, Some(1.05));
    assert_eq!(rep.fitted_constant, 1.0);
    assert!(rep.passed());
    rep.add_check("extra", false);
    assert!(!rep.passed());
    let meta = vec![("config_hash".to_string(), "00ff".to_string())];
    let mut csv_out = Vec::new();
    rep.write_csv(&mut csv_out, &meta).unwrap();
    let text = String::from_utf8(csv_out).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "r,measured,bound,ratio");
    assert_eq!(text.lines().nth(2).unwrap(), "1,2,4,0.5");
    let mut kv = Vec::new();
    rep.write_verdict(&mut kv, &meta).unwrap();
    let kv = String::from_utf8(kv).unwrap();
    assert!(kv.starts_with("# config_hash=00ff\n"));
    assert!(kv.contains("check.extra=fail") && kv.ends_with("verdict=fail\n"));

    let unstable = EstimateReport::new("demo", vec![Sample { params: vec![], measured: 1.0, bound: 1.0 }], Some(1.5));
    assert!(!unstable.passed());
}

#[test]
fn stokes_audits_give_finite_stable_constants() {
    let g = grid();
    let spec = QuadratureSpec::default();
    let rep = stokes_decay_check(0.0, g.clone(), &spec).unwrap();
    assert!(rep.passed(), "stability {:?}", rep.stability());
    assert!(rep.fitted_constant > 0.0 && rep.fitted_constant < 10.0);
    let fit = rep.exponent_fit.unwrap();
    // at least the bounded rate; the potential of this input decays faster
    assert!(-fit.slope > 2.0 - 0.15, "{fit:?}");
    assert!(stokes_decay_check(1.0, g.clone(), &spec).is_err());

    let holder = phi_holder_check(0.3, g, &spec).unwrap();
    assert!(holder.passed(), "stability {:?}", holder.stability());
    assert!(holder.fitted_constant.is_finite() && holder.fitted_constant > 0.0);
}

#[test]
fn kernel_audit_passes_on_the_closed_form() {
    let reports = kernel_audit(17, 120).unwrap();
    assert_eq!(reports.len(), 3);
    for r in &reports {
        assert!(r.passed(), "{} {:?} {:?}", r.name, r.checks, r.notes);
    }
    // the definition-based tensor near the origin joins its series branch smoothly
    for r in [0.9e-3, 1.1e-3] {
        let q = oseen_by_definition(&[r, 0.0, 0.0], 1.0).unwrap();
        let s = dss_core::kernels::oseen_tensor(&[r, 0.0, 0.0], 1.0).unwrap();
        assert!((q[0][0] - s.tensor[0][0]).abs() < 1e-12 && (q[1][1] - s.tensor[1][1]).abs() < 1e-12);
    }
}
