mod common;

use std::sync::Arc;

use approx::assert_abs_diff_eq;
use common::{circle, rng, rough_density, sphere, ssp_transport};
use proptest::prelude::*;
use vicsek_core::density::l1_distance;
use vicsek_core::error::Error;
use vicsek_core::sphere::{distance_unchecked, dot, norm, sub};
use vicsek_core::transport::*;
use vicsek_core::Density;

#[test]
fn exact_solver_matches_the_augmenting_path_oracle() {
    let g = circle(8);
    let c = cost_matrix(&g);
    let mut r = rng(11);
    for _ in 0..20 {
        let a = rough_density(&g, &mut r);
        let b = rough_density(&g, &mut r);
        let (plan, w2) = solve_exact(&a, &b).unwrap();
        let want = ssp_transport(&a.masses(), &b.masses(), &|i, j| c.get(i, j));
        assert_abs_diff_eq!(plan.cost(), want, epsilon = 1e-12);
        assert_abs_diff_eq!(w2 * w2, want, epsilon = 1e-12);
        assert!(plan.marginal_violation() < 1e-13);
    }
}

#[test]
fn exact_solver_matches_the_oracle_on_a_coarse_sphere() {
    let g = sphere(4, 8);
    let c = cost_matrix(&g);
    let mut r = rng(12);
    for _ in 0..5 {
        let a = rough_density(&g, &mut r);
        let b = rough_density(&g, &mut r);
        let (plan, _) = solve_exact(&a, &b).unwrap();
        let want = ssp_transport(&a.masses(), &b.masses(), &|i, j| c.get(i, j));
        assert_abs_diff_eq!(plan.cost(), want, epsilon = 1e-12);
    }
}

#[test]
fn cost_is_squared_geodesic_distance() {
    let g = sphere(8, 16);
    let c = cost_matrix(&g);
    for (i, j) in [(0, 1), (3, 50), (0, g.len() - 1)] {
        let d = distance_unchecked(&g.nodes[i], &g.nodes[j]);
        assert_abs_diff_eq!(c.get(i, j), d * d, epsilon = 1e-12);
    }
    assert_abs_diff_eq!(c.get(0, g.len() - 1), std::f64::consts::PI.powi(2), epsilon = 1e-12);
}

#[test]
fn identical_and_concentrated_pairs() {
    let g = sphere(8, 16);
    let mut r = rng(13);
    let a = rough_density(&g, &mut r);
    let (plan, w2) = solve_exact(&a, &a).unwrap();
    assert!(w2.abs() < 1e-12);
    assert!(plan.entries.iter().all(|(i, j, m)| i == j || *m < 1e-15));
    for (i, j) in [(0, 7), (10, 60), (0, g.len() - 1)] {
        let p = Density::point_mass(Arc::clone(&g), i).unwrap();
        let q = Density::point_mass(Arc::clone(&g), j).unwrap();
        let (_, w2) = solve_exact(&p, &q).unwrap();
        assert_abs_diff_eq!(w2, distance_unchecked(&g.nodes[i], &g.nodes[j]), epsilon = 1e-12);
    }
}

#[test]
fn entropic_cost_dominates_exact_and_grows_with_gamma() {
    let g = sphere(8, 16);
    let mut r = rng(14);
    for _ in 0..3 {
        let a = rough_density(&g, &mut r);
        let b = rough_density(&g, &mut r);
        let (exact, _) = solve_exact(&a, &b).unwrap();
        let mut prev = exact.cost() - 1e-9;
        for gamma in [0.02, 0.05, 0.1, 0.3] {
            let (plan, _) = solve_entropic(&a, &b, &OtConfig::entropic(gamma)).unwrap();
            assert!(plan.marginal_violation() <= 1e-9 * 1.01);
            assert!(plan.cost() >= prev, "gamma {gamma}: {} < {prev}", plan.cost());
            prev = plan.cost();
        }
    }
}

#[test]
fn entropic_approaches_exact_as_gamma_shrinks() {
    let g = sphere(8, 16);
    let mut r = rng(15);
    let a = rough_density(&g, &mut r);
    let b = rough_density(&g, &mut r);
    let (exact, _) = solve_exact(&a, &b).unwrap();
    let gaps: Vec<f64> = [0.1, 0.03, 0.01]
        .iter()
        .map(|gm| solve_entropic(&a, &b, &OtConfig::entropic(*gm)).unwrap().0.cost() - exact.cost())
        .collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2] && gaps[2] >= -1e-9, "{gaps:?}");
}

#[test]
fn exact_solver_refuses_large_grids() {
    let g = sphere(40, 64);
    assert!(g.len() > EXACT_CAP);
    let u = Density::uniform(Arc::clone(&g));
    match solve_exact(&u, &u) {
        Err(Error::Capacity { nodes, cap }) => {
            assert_eq!(nodes, g.len());
            assert_eq!(cap, EXACT_CAP);
        }
        other => panic!("expected capacity error, got {:?}", other.map(|x| x.1)),
    }
}

#[test]
fn mismatched_grids_are_rejected() {
    let a = Density::uniform(sphere(8, 16));
    let b = Density::uniform(sphere(10, 16));
    assert!(solve_exact(&a, &b).is_err());
    assert!(OtConfig::entropic(0.0).validate().is_err());
    assert!(OtConfig { tolerance: 0.0, ..OtConfig::default() }.validate().is_err());
}

#[test]
fn displacement_interpolation_endpoints_and_geodesic_property() {
    let g = sphere(8, 16);
    let mut r = rng(16);
    let a = rough_density(&g, &mut r);
    let b = rough_density(&g, &mut r);
    let (plan, w) = solve_exact(&a, &b).unwrap();
    let start = displacement_interpolate(&plan, 0.0).unwrap();
    assert!(l1_distance(&start, &a).unwrap() < 1e-12);
    let end = displacement_interpolate(&plan, 1.0).unwrap();
    assert!(l1_distance(&end, &b).unwrap() < 1e-12);
    let mid = displacement_interpolate(&plan, 0.5).unwrap();
    assert_abs_diff_eq!(mid.mass(), 1.0, epsilon = 1e-12);
    // Midpoints are deposited in cells, so the geodesic identity holds up to
    // the cell size.
    let (_, w0) = solve_exact(&a, &mid).unwrap();
    let (_, w1) = solve_exact(&mid, &b).unwrap();
    assert!(w0 + w1 >= w - 1e-12);
    assert!(w0 + w1 <= w + 2.0 * g.mesh_width());
    assert!(displacement_interpolate(&plan, 1.5).is_err());
}

#[test]
fn barycentric_map_examples() {
    let g = sphere(8, 16);
    let a = Density::uniform(Arc::clone(&g));
    let (plan, _) = solve_exact(&a, &a).unwrap();
    assert!(barycentric_map(&plan).values.iter().all(|v| norm(v) < 1e-12));

    let (i, j) = (20, 21);
    let p = Density::point_mass(Arc::clone(&g), i).unwrap();
    let q = Density::point_mass(Arc::clone(&g), j).unwrap();
    let (plan, _) = solve_exact(&p, &q).unwrap();
    let v = barycentric_map(&plan).values[i];
    let d = distance_unchecked(&g.nodes[i], &g.nodes[j]);
    assert_abs_diff_eq!(norm(&v), d, epsilon = 1e-12);
    assert!(dot(&v, &g.nodes[i]).abs() < 1e-12);
    assert!(dot(&v, &sub(&g.nodes[j], &g.nodes[i])) > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn distance_axioms(seed in 0u64..10_000) {
        let g = sphere(6, 8);
        let mut r = rng(seed);
        let a = rough_density(&g, &mut r);
        let b = rough_density(&g, &mut r);
        let c = rough_density(&g, &mut r);
        let ab = solve_exact(&a, &b).unwrap().1;
        let ba = solve_exact(&b, &a).unwrap().1;
        let ac = solve_exact(&a, &c).unwrap().1;
        let cb = solve_exact(&c, &b).unwrap().1;
        prop_assert!((ab - ba).abs() < 1e-10);
        prop_assert!(ab <= ac + cb + 1e-10);
        prop_assert!(ab >= 0.0 && ab <= std::f64::consts::PI);
    }

    #[test]
    fn plans_have_the_right_marginals(seed in 0u64..10_000) {
        let g = circle(16);
        let mut r = rng(seed);
        let a = rough_density(&g, &mut r);
        let b = rough_density(&g, &mut r);
        let (plan, _) = solve_exact(&a, &b).unwrap();
        let (ra, cb) = plan.marginals();
        for (x, y) in ra.iter().zip(a.masses()) {
            prop_assert!((x - y).abs() < 1e-13);
        }
        for (x, y) in cb.iter().zip(b.masses()) {
            prop_assert!((x - y).abs() < 1e-13);
        }
        prop_assert!(plan.entries.iter().all(|e| e.2 >= 0.0));
        // Basic solutions have at most 2n - 1 nonzero entries.
        prop_assert!(plan.entries.iter().filter(|e| e.2 > 0.0).count() <= 2 * g.len() - 1);
    }
}
