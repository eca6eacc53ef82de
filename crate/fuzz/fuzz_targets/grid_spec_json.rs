#![no_main]

use libfuzzer_sys::fuzz_target;
use vicsek_core::io::parse_grid_spec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = parse_grid_spec(text) {
        assert_eq!(parse_grid_spec(&spec.to_json()).expect("round trip"), spec);
    }
});
