#![no_main]

use libfuzzer_sys::fuzz_target;
use vicsek_core::io::parse_plan_csv;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(entries) = parse_plan_csv(text) {
        assert!(entries.iter().all(|e| e.2.is_finite() && e.2 >= 0.0));
    }
});
