mod common;

use std::sync::Arc;

use approx::assert_abs_diff_eq;
use common::{circle, sphere};
use vicsek_core::density::{fisher_von_mises, free_energy, l1_distance, momentum, slope, FreeEnergyParams};
use vicsek_core::fpsolver::*;
use vicsek_core::presets::{standard_presets, Preset};
use vicsek_core::sphere::norm;
use vicsek_core::verify::dissipation_mismatch;
use vicsek_core::Density;

fn rotated(grid: &Arc<vicsek_core::SphereGrid>) -> Density {
    Preset::RotatedVmf { kappa: 2.5, direction: [0.0, 0.0, 1.0], axis: [1.0, 1.0, 0.0], angle: 0.7 }
        .density(grid)
        .unwrap()
}

fn cfg(t_end: f64) -> SolverConfig {
    SolverConfig { t_end, ..SolverConfig::default() }
}

#[test]
fn equilibria_are_stationary() {
    let g = sphere(16, 32);
    let m = fisher_von_mises(&g, &[0.0, 0.6, 0.8]).unwrap();
    let out = step(&m, &SolverConfig { dt: 1e-2, ..cfg(1.0) }).unwrap();
    assert!(l1_distance(&m, &out).unwrap() < 1e-6);
    let rec = run(&m, &cfg(0.5)).unwrap();
    assert!(l1_distance(&m, &rec.final_density).unwrap() < 1e-5);
}

#[test]
fn pure_diffusion_momentum_decays_exactly() {
    for (g, rate) in [(sphere(16, 32), 2.0), (circle(64), 1.0)] {
        let rho0 = if g.dim == 3 {
            rotated(&g)
        } else {
            Preset::RotatedVmf { kappa: 2.0, direction: [1.0, 0.0, 0.0], axis: [0.0, 0.0, 1.0], angle: 0.3 }
                .density(&g)
                .unwrap()
        };
        let j0 = norm(&momentum(&rho0));
        let rec = run(&rho0, &SolverConfig { drift: false, ..cfg(1.0) }).unwrap();
        for r in &rec.records {
            let want = j0 * (-rate * r.t).exp();
            assert!((r.j_norm - want).abs() <= 1e-2 * want, "t {}: {} vs {want}", r.t, r.j_norm);
        }
    }
}

#[test]
fn mass_is_conserved_over_many_steps() {
    let g = sphere(8, 16);
    let rho0 = rotated(&g);
    let rec = run(&rho0, &SolverConfig { dt: 1e-3, t_end: 10.0, record_every: 1000, ..SolverConfig::default() }).unwrap();
    assert_eq!(rec.steps, 10_000);
    for r in &rec.records {
        assert!((r.mass - 1.0).abs() <= 1e-10);
    }
    assert!(rec.min_value >= 0.0);
}

#[test]
fn energy_decays_at_the_rate_of_the_squared_slope() {
    let g = sphere(16, 32);
    let rho0 = rotated(&g);
    let rec = run(&rho0, &SolverConfig { dt: 1e-4, record_every: 10, ..cfg(0.2) }).unwrap();
    assert!(dissipation_mismatch(&rec) < 0.05);
    assert!(rec.max_energy_increase <= 1e-12);
    assert!(rec.records.windows(2).all(|w| w[1].energy <= w[0].energy + 1e-12));
}

#[test]
fn momentum_stays_above_the_heat_flow_bound() {
    let g = sphere(16, 32);
    for (name, p) in standard_presets() {
        let rho0 = p.density(&g).unwrap();
        let rec = run(&rho0, &cfg(2.0)).unwrap();
        let j0 = rec.initial().j_norm;
        for r in &rec.records {
            assert!(r.j_norm >= j0 * (-2.0 * r.t).exp() - 1e-12, "{name} at t {}", r.t);
        }
    }
}

#[test]
fn flow_relaxes_to_an_equilibrium() {
    let g = sphere(16, 32);
    let rho0 = rotated(&g);
    let rec = run(&rho0, &cfg(6.0)).unwrap();
    let last = rec.last();
    assert!(last.l1_to_m < 1e-3, "{}", last.l1_to_m);
    assert!(last.slope < 1e-3);
    // Limit momentum is the grid equilibrium value.
    let om = vicsek_core::density::omega_direction(&rec.final_density, FreeEnergyParams { epsilon: 0.0 }).unwrap();
    let m = fisher_von_mises(&g, &om).unwrap();
    assert_abs_diff_eq!(last.j_norm, norm(&momentum(&m)), epsilon = 1e-3);
}

#[test]
fn schemes_agree_over_a_short_horizon() {
    let g = sphere(8, 16);
    let rho0 = rotated(&g);
    let dt = 0.5 * cfl_bound(&g);
    let base = SolverConfig { dt, t_end: 0.2, ..SolverConfig::default() };
    let a = run(&rho0, &SolverConfig { scheme: Scheme::Exponential, ..base.clone() }).unwrap();
    let b = run(&rho0, &SolverConfig { scheme: Scheme::Explicit, ..base.clone() }).unwrap();
    let c = run(&rho0, &SolverConfig { scheme: Scheme::SemiImplicitDiffusion, ..base }).unwrap();
    assert!(l1_distance(&a.final_density, &b.final_density).unwrap() < 1e-2);
    assert!(l1_distance(&a.final_density, &c.final_density).unwrap() < 1e-2);
}

#[test]
fn regularised_flow_and_uniform_start() {
    let g = sphere(8, 16);
    let u = Density::uniform(Arc::clone(&g));
    // eps = 0 has no direction at the uniform state.
    assert!(run(&u, &cfg(0.1)).is_err());
    // eps > 0: the uniform state is stationary.
    let rec = run(&u, &SolverConfig { epsilon: 0.1, ..cfg(0.1) }).unwrap();
    assert!(l1_distance(&u, &rec.final_density).unwrap() < 1e-12);
}

#[test]
fn invalid_configurations_are_rejected() {
    let g = sphere(8, 16);
    let rho0 = rotated(&g);
    for bad in [
        SolverConfig { dt: 0.0, ..SolverConfig::default() },
        SolverConfig { t_end: -1.0, ..SolverConfig::default() },
        SolverConfig { epsilon: 2.0, ..SolverConfig::default() },
        SolverConfig { record_every: 0, ..SolverConfig::default() },
        SolverConfig { scheme: Scheme::Explicit, dt: 1.0, ..SolverConfig::default() },
    ] {
        assert!(bad.validate(&g).is_err());
        assert!(run(&rho0, &bad).is_err());
    }
}

#[test]
fn slope_is_the_dissipation_of_one_small_step() {
    let g = sphere(16, 32);
    let rho0 = rotated(&g);
    let params = FreeEnergyParams { epsilon: 0.0 };
    let dt = 1e-6;
    let next = step(&rho0, &SolverConfig { dt, ..cfg(dt) }).unwrap();
    let rate = (free_energy(&next, params) - free_energy(&rho0, params)) / dt;
    let s = slope(&rho0, params).unwrap();
    assert!((rate + s * s).abs() < 1e-3 * s * s, "{rate} vs {}", -s * s);
}
