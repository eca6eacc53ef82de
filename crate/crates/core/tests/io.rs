mod common;

use std::sync::Arc;

use common::{circle, rng, rough_density, sphere};
use proptest::prelude::*;
use vicsek_core::fpsolver::{run, Diagnostics, SolverConfig};
use vicsek_core::io::*;
use vicsek_core::presets::Preset;
use vicsek_core::transport::solve_exact;
use vicsek_core::Density;

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn density_round_trip_is_bitwise() {
    let mut r = rng(21);
    for g in [sphere(8, 16), circle(30)] {
        let rho = rough_density(&g, &mut r);
        let text = density_to_csv(&rho);
        assert!(text.starts_with("# grid {"));
        let back = density_from_csv(&text).unwrap();
        assert_eq!(bits(back.values()), bits(rho.values()));
        let on = density_from_csv_on(&text, &g).unwrap();
        assert!(Arc::ptr_eq(on.grid(), &g));
    }
}

#[test]
fn density_file_errors() {
    let g = sphere(8, 16);
    let text = density_to_csv(&Density::uniform(Arc::clone(&g)));
    assert!(density_from_csv("").is_err());
    assert!(density_from_csv("node_index,value\n0,1\n").is_err());
    // Dropped row.
    let short: String = text.lines().take(text.lines().count() - 1).map(|l| format!("{l}\n")).collect();
    assert!(density_from_csv(&short).is_err());
    // Repeated index.
    let rep = text.replacen("\n1,", "\n0,", 1);
    assert!(parse_density_csv(&rep).is_err());
    // Negative value.
    let neg = text.replacen("\n3,", "\n3,-", 1);
    assert!(density_from_csv(&neg).is_err());
    // Different grid.
    assert!(density_from_csv_on(&text, &sphere(10, 16)).is_err());
    // Oversized grid spec is refused before building.
    let huge = "# grid {\"dim\":3,\"kind\":\"latlon\",\"resolution\":{\"n_theta\":100000,\"n_phi\":100000}}\nnode_index,value\n0,1\n";
    assert!(density_from_csv(huge).is_err());
}

#[test]
fn grid_spec_json() {
    let g = sphere(16, 32);
    let spec = GridSpec::of(&g);
    let json = spec.to_json();
    assert_eq!(json, r#"{"dim":3,"kind":"latlon","resolution":{"n_theta":16,"n_phi":32}}"#);
    assert_eq!(parse_grid_spec(&json).unwrap(), spec);
    assert_eq!(spec.build().unwrap().len(), g.len());
    assert!(parse_grid_spec(r#"{"dim":3,"kind":"latlon","resolution":{"n_theta":16,"n_phi":32},"x":1}"#).is_err());
    let bad = parse_grid_spec(r#"{"dim":2,"kind":"latlon","resolution":{"n_theta":16,"n_phi":32}}"#).unwrap();
    assert!(bad.build().is_err());
    let c = parse_grid_spec(r#"{"dim":2,"kind":"circle","resolution":{"n":12}}"#).unwrap();
    assert_eq!(c.build().unwrap().len(), 12);
}

#[test]
fn plan_round_trip() {
    let g = sphere(8, 16);
    let mut r = rng(22);
    let (plan, _) = solve_exact(&rough_density(&g, &mut r), &rough_density(&g, &mut r)).unwrap();
    let back = parse_plan_csv(&plan_to_csv(&plan)).unwrap();
    assert_eq!(back.len(), plan.entries.len());
    for (a, b) in back.iter().zip(&plan.entries) {
        assert_eq!((a.0, a.1, a.2.to_bits()), (b.0, b.1, b.2.to_bits()));
    }
    assert!(parse_plan_csv("i,j,mass\n0,1,-1\n").is_err());
    assert!(parse_plan_csv("i,j,mass\n0,1,inf\n").is_err());
    assert!(parse_plan_csv("i,j\n0,1\n").is_err());
    assert!(parse_plan_csv("i,j,mass\n0,1\n").is_err());
}

#[test]
fn trajectory_round_trip_and_files() {
    let g = sphere(8, 16);
    let rho0 = Preset::RotatedVmf { kappa: 2.0, direction: [0.0, 0.0, 1.0], axis: [1.0, 0.0, 0.0], angle: 0.4 }
        .density(&g)
        .unwrap();
    let rec = run(&rho0, &SolverConfig { t_end: 0.05, record_every: 20, snapshots: true, ..SolverConfig::default() }).unwrap();
    let text = trajectory_to_csv(&rec.records);
    assert!(text.starts_with(&TRAJECTORY_HEADER.join(",")));
    let back = parse_trajectory_csv(&text).unwrap();
    assert_eq!(back, rec.records);

    let dir = std::env::temp_dir().join(format!("vicsek-io-{}", std::process::id()));
    write_trajectory(&dir, &rec).unwrap();
    let fin = read_density(&dir.join("final_density.csv")).unwrap();
    assert_eq!(bits(fin.values()), bits(rec.final_density.values()));
    let index = std::fs::read_to_string(dir.join("snapshots.csv")).unwrap();
    assert_eq!(index.lines().count(), rec.snapshots.len() + 1);
    assert!(dir.join("snapshot_00000.csv").exists());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn trajectory_parse_errors() {
    let h = TRAJECTORY_HEADER.join(",");
    assert!(parse_trajectory_csv(&format!("{h}\n1,1,0,0,0,0,0,0,0,0\n0,1,0,0,0,0,0,0,0,0\n")).is_err());
    assert!(parse_trajectory_csv(&format!("{h}\nNaN,1,0,0,0,0,0,0,0,0\n")).is_err());
    assert!(parse_trajectory_csv(&format!("{h}\n0,1,0,0,0\n")).is_err());
    let ok = parse_trajectory_csv(&format!("{h}\n0,1,0,0,0,0,-2.5,NaN,NaN,0\n")).unwrap();
    assert!(ok[0].rel_entropy.is_nan());
}

fn diag() -> impl Strategy<Value = Diagnostics> {
    let f = prop_oneof![any::<f64>().prop_filter("finite", |x| x.is_finite()), Just(f64::NAN), Just(0.0)];
    (0.0f64..1e6, proptest::collection::vec(f, 9)).prop_map(|(t, v)| Diagnostics {
        t,
        mass: v[0],
        j: [v[1], v[2], v[3]],
        j_norm: v[4],
        energy: v[5],
        rel_entropy: v[6],
        l1_to_m: v[7],
        slope: v[8],
    })
}

fn row_bits(d: &Diagnostics) -> Vec<u64> {
    [d.t, d.mass, d.j[0], d.j[1], d.j[2], d.j_norm, d.energy, d.rel_entropy, d.l1_to_m, d.slope]
        .iter()
        .map(|v| if v.is_nan() { f64::NAN.to_bits() } else { v.to_bits() })
        .collect()
}

proptest! {
    #[test]
    fn density_values_round_trip(values in proptest::collection::vec(1e-300f64..1e3, 30)) {
        let g = circle(30);
        let rho = Density::normalized(Arc::clone(&g), values).unwrap();
        let back = density_from_csv(&density_to_csv(&rho)).unwrap();
        prop_assert_eq!(bits(back.values()), bits(rho.values()));
    }

    #[test]
    fn trajectory_rows_round_trip(mut rows in proptest::collection::vec(diag(), 0..20)) {
        rows.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
        let back = parse_trajectory_csv(&trajectory_to_csv(&rows)).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for (a, b) in back.iter().zip(&rows) {
            prop_assert_eq!(row_bits(a), row_bits(b));
        }
    }

    #[test]
    fn parsers_never_panic(text in "\\PC{0,200}") {
        let _ = parse_density_csv(&text);
        let _ = parse_grid_spec(&text);
        let _ = parse_plan_csv(&text);
        let _ = parse_trajectory_csv(&text);
    }
}
