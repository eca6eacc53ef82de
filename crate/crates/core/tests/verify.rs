mod common;

use std::f64::consts::{E, PI};

use approx::assert_abs_diff_eq;
use common::{rng, rough_density, sphere};
use vicsek_core::fpsolver::{run, SolverConfig};
use vicsek_core::presets::standard_presets;
use vicsek_core::verify::constants::*;
use vicsek_core::verify::*;

#[test]
fn closed_form_constants() {
    assert_abs_diff_eq!(equilibrium_momentum_s2(), 0.313_035_285_499_331_3, epsilon = 1e-15);
    assert_abs_diff_eq!(equilibrium_momentum_s2(), 2.0 / (E * E - 1.0), epsilon = 1e-15);
    assert_abs_diff_eq!(1.0 / normalizer_s2(), 2.0 * PI * (E - 1.0 / E), epsilon = 1e-12);
    assert_abs_diff_eq!(entropy_rate(3), 2.0 / (E * E), epsilon = 1e-15);
    assert_eq!(entropy_rate(2), 0.0);
    assert_eq!(momentum_rate(3), 4.0);
    assert_eq!(momentum_rate(2), 2.0);
    assert_abs_diff_eq!(lambda_epsilon(0.25, 3), 2.0, epsilon = 1e-15);
    assert_abs_diff_eq!(lambda_epsilon(1.0, 2), 2.0, epsilon = 1e-15);
    assert_abs_diff_eq!(lambda_stability(0.5, 3), 4.0, epsilon = 1e-15);
    assert_abs_diff_eq!(stability_window(0.5, 1e-3), 0.0625 / 0.256, epsilon = 1e-15);
    let (r, quad) = closeness_radius(0.5);
    assert!(quad);
    assert_abs_diff_eq!(r, 0.25 / 16.0, epsilon = 1e-15);
    assert_abs_diff_eq!(energy_floor(4.0 * PI, 0.0), -4.0 * PI / E - 1.0, epsilon = 1e-15);
}

#[test]
fn momentum_checks_on_a_short_run() {
    let g = sphere(8, 16);
    let (_, p) = &standard_presets()[1];
    let rec = run(&p.density(&g).unwrap(), &SolverConfig { t_end: 1.0, ..SolverConfig::default() }).unwrap();
    let r = check_momentum_bound(&rec, 0.05);
    assert!(r.passed && r.status == Status::Passed, "{:?}", r.measured);
    assert!(r.bound.values().all(|b| !b.source.is_empty()));

    // A pure heat flow must fail the positivity check: it is a control.
    let heat = run(&p.density(&g).unwrap(), &SolverConfig { t_end: 3.0, drift: false, ..SolverConfig::default() }).unwrap();
    let eq = check_pure_diffusion_equality(&heat, 1e-2);
    assert!(eq.passed, "{:?}", eq.measured);
    let c = check_momentum_positivity(&heat, 0.05, true);
    assert_eq!(c.status, Status::FailedAsExpected);
    assert!(!c.is_failure());
}

#[test]
fn density_checks_pass() {
    let g = sphere(8, 16);
    let mut r = rng(31);
    let pairs: Vec<_> = (0..10).map(|_| (rough_density(&g, &mut r), rough_density(&g, &mut r))).collect();
    assert!(check_ckp(&pairs).unwrap().passed);
    let singles: Vec<_> = pairs.iter().map(|p| p.0.clone()).collect();
    assert!(check_relation_one(&singles, &[0.0, 1e-2, 1.0]).unwrap().passed);
    assert!(check_momentum_continuity(&pairs, 0.0).unwrap().passed);
}

#[test]
fn quadrature_check_and_report_schema() {
    let grids = [sphere(16, 32), sphere(32, 64), sphere(64, 128)];
    let r = check_jm_quadrature(&grids, &[0.0, 0.0, 1.0]).unwrap();
    assert!(r.passed);
    let json = reports_to_json(std::slice::from_ref(&r));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let obj = &v[0];
    for key in ["check", "citation", "measured", "bound", "margin", "passed", "runtime_seconds"] {
        assert!(obj.get(key).is_some(), "missing {key}");
    }
    assert!(r.summary_line().starts_with("PASS"));
}

#[test]
fn suite_selection_and_deterministic_output() {
    let cfg = SuiteConfig { quick: true, only: vec!["relation_one".into(), "1".into()], timing: false, ..SuiteConfig::default() };
    let a = run_all(&cfg).unwrap();
    let names: Vec<_> = a.iter().map(|r| r.check.as_str()).collect();
    assert_eq!(names, ["jm_quadrature", "relation_one"]);
    assert!(a.iter().all(|r| r.runtime_seconds == 0.0));
    let b = run_all(&cfg).unwrap();
    assert_eq!(reports_to_json(&a), reports_to_json(&b));
    let ids: Vec<u8> = CRITERIA.iter().map(|c| c.id).collect();
    assert_eq!(ids, [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 0]);
}
