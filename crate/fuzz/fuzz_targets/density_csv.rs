#![no_main]

use libfuzzer_sys::fuzz_target;
use vicsek_core::io::{density_from_csv, density_to_csv, parse_density_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(file) = parse_density_csv(text) else { return };
    // keep grid construction cheap
    if file.values.len() > 4096 {
        return;
    }
    if let Ok(rho) = density_from_csv(text) {
        let again = density_from_csv(&density_to_csv(&rho)).expect("written density parses");
        let a: Vec<u64> = rho.values().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = again.values().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }
});
