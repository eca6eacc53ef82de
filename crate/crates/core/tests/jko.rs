mod common;

use std::sync::Arc;

use common::{circle, sphere};
use vicsek_core::density::{free_energy, l1_distance, momentum, FreeEnergyParams};
use vicsek_core::jko::*;
use vicsek_core::presets::Preset;
use vicsek_core::sphere::norm;
use vicsek_core::Density;

fn concentrated(g: &Arc<vicsek_core::SphereGrid>) -> Density {
    Preset::RotatedVmf { kappa: 12.0, direction: [0.0, 0.0, 1.0], axis: [1.0, 0.0, 0.0], angle: 0.5 }
        .density(g)
        .unwrap()
}

#[test]
fn a_step_decreases_the_energy_and_keeps_a_density() {
    let g = sphere(16, 32);
    let rho = concentrated(&g);
    let cfg = JkoConfig { tau: 4e-2, ..JkoConfig::default() };
    let mut warm = JkoWarmStart::default();
    let st = jko_step_detailed(&rho, &cfg, &mut warm).unwrap();
    assert!((st.density.mass() - 1.0).abs() < 1e-10);
    assert!(st.density.min_value() >= 0.0);
    let e1 = free_energy(&st.density, cfg.params());
    assert!(e1 < st.previous_energy);
    assert!(st.w2 > 0.0);
    assert!(l1_distance(&st.density, &rho).unwrap() > 1e-4);
    // The outer loop converged and recorded its iterates.
    assert!(!st.log.is_empty());
    assert!(st.plan.marginal_violation() < 1e-9);
}

#[test]
fn smaller_steps_move_less() {
    let g = sphere(16, 32);
    let rho = concentrated(&g);
    let w: Vec<f64> = [4e-2, 1e-2]
        .iter()
        .map(|t| {
            let cfg = JkoConfig { tau: *t, ..JkoConfig::default() };
            jko_step_detailed(&rho, &cfg, &mut JkoWarmStart::default()).unwrap().w2
        })
        .collect();
    assert!(w[1] < w[0], "{w:?}");
}

#[test]
fn run_on_the_circle_is_monotone_and_spreads() {
    let g = circle(48);
    let rho0 = Preset::RotatedVmf { kappa: 8.0, direction: [1.0, 0.0, 0.0], axis: [0.0, 0.0, 1.0], angle: 0.0 }
        .density(&g)
        .unwrap();
    let cfg = JkoConfig { tau: 5e-2, ..JkoConfig::default() };
    let traj = jko_run(&rho0, 0.25, &cfg).unwrap();
    assert_eq!(traj.steps.len(), 5);
    assert_eq!(traj.densities.len(), 6);
    let recs = &traj.record.records;
    assert!(recs.windows(2).all(|w| w[1].energy <= w[0].energy + 1e-12));
    assert!(recs.windows(2).all(|w| w[1].t > w[0].t));
    // A concentrated start loses momentum on its way to equilibrium.
    assert!(recs.last().unwrap().j_norm < recs[0].j_norm);
    assert!(norm(&momentum(&traj.record.final_density)) > 0.0);
}

#[test]
fn objective_is_consistent() {
    let g = circle(32);
    let rho = Preset::RotatedVmf { kappa: 5.0, direction: [0.0, 1.0, 0.0], axis: [0.0, 0.0, 1.0], angle: 0.0 }
        .density(&g)
        .unwrap();
    let cfg = JkoConfig { tau: 2e-2, ..JkoConfig::default() };
    // At sigma = rho the objective is the energy.
    let e = free_energy(&rho, FreeEnergyParams { epsilon: cfg.epsilon });
    assert!((jko_objective(&rho, &rho, &cfg).unwrap() - e).abs() < 1e-12);
    let st = jko_step_detailed(&rho, &cfg, &mut JkoWarmStart::default()).unwrap();
    let obj = jko_objective(&st.density, &rho, &cfg).unwrap();
    assert!((obj - st.objective).abs() < 1e-10);
    assert!(st.minimality_gap().is_finite());
}

#[test]
fn configuration_is_validated() {
    let g = circle(16);
    let rho = Density::uniform(Arc::clone(&g));
    for bad in [
        JkoConfig { tau: 0.0, ..JkoConfig::default() },
        JkoConfig { epsilon: 0.0, ..JkoConfig::default() },
        JkoConfig { epsilon: 2.0, ..JkoConfig::default() },
        JkoConfig { max_outer_iters: 0, ..JkoConfig::default() },
    ] {
        assert!(bad.validate().is_err());
        assert!(jko_step(&rho, &bad).is_err());
    }
    assert!(jko_run(&rho, -1.0, &JkoConfig::default()).is_err());
}
