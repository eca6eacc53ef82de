#![no_main]

use libfuzzer_sys::fuzz_target;
use vicsek_core::fpsolver::Diagnostics;
use vicsek_core::io::{parse_trajectory_csv, trajectory_to_csv};

fn bits(rows: &[Diagnostics]) -> Vec<u64> {
    rows.iter()
        .flat_map(|r| {
            [r.t, r.mass, r.j[0], r.j[1], r.j[2], r.j_norm, r.energy, r.rel_entropy, r.l1_to_m, r.slope]
        })
        .map(|v| if v.is_nan() { f64::NAN.to_bits() } else { v.to_bits() })
        .collect()
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_trajectory_csv(text) {
        let again = parse_trajectory_csv(&trajectory_to_csv(&rows)).expect("written trajectory parses");
        assert_eq!(bits(&again), bits(&rows));
    }
});
